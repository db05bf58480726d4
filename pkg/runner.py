# runner.py
# © 2025 Colt McVey
# Executes seeded experiment runs and sweeps, writing per-round CSV rows and run manifests.

import io
import math
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

import config as app_config
from averaging import (
    AveragingProtocol, kstar_theorem2, kstar_optimization,
)
from data import Dataset, SampleStream, generate_synthetic, read_idx
from data_manager import get_output_dir, atomic_write_text
from dda_core import NodeState, ReferenceState, Schedule, RoundTrace, run_round, update_reference
from errors import InvalidParam, ConfigError
from losses import LossModel, build_loss_model, compute_reference_optimum, expected_loss
from manifest import RunManifest, array_checksum
from metrics import (
    RegretLedger, RatioCurve, RuntimeModel, record_regret, optimality_gap, runtime_units,
    regret_ratio_curve, regret_upper_bound, gap_upper_bound,
)
from settings_manager import ExperimentConfig
from topology import Graph, SpectralInfo, make_graph, metropolis_weights, lazify, spectral_info

PILOT_MIN_ROUNDS = 100


@dataclass
class RunResult:
    """Per-round rows of every seed, the run manifest and (optionally) retained traces."""
    frame: pd.DataFrame
    manifest: RunManifest
    config: ExperimentConfig | None = None
    traces: dict = field(default_factory=dict)
    csv_path: Path | None = None
    manifest_path: Path | None = None

    @property
    def n(self) -> int:
        return int(self.frame["n"].iloc[0])

    def seed_mean(self, column: str) -> pd.Series:
        """Mean of a column across seeds, indexed by round."""
        return self.frame.groupby("round")[column].mean()

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        self.frame.to_csv(buffer, index=False, float_format=app_config.CSV_FLOAT_FORMAT, lineterminator="\n")
        return buffer.getvalue()

    @classmethod
    def load(cls, csv_path: str | Path) -> "RunResult":
        csv_path = Path(csv_path)
        manifest_path = csv_path.with_suffix(".manifest")
        manifest = RunManifest.load(manifest_path) if manifest_path.exists() else RunManifest()
        return cls(pd.read_csv(csv_path), manifest, csv_path=csv_path,
                   manifest_path=manifest_path if manifest_path.exists() else None)


@dataclass
class SweepResult:
    results: list
    ratios: dict


@dataclass
class _RunSetup:
    dataset: Dataset
    eval_set: Dataset
    eval_fstar: float
    model: LossModel
    graph: Graph
    spectrum: SpectralInfo
    protocol: AveragingProtocol
    latency: int
    mu: int
    loss_mu: int
    schedule: Schedule
    runtime: RuntimeModel
    rounds: int


def rounds_for_epsilon(epsilon: float, n: int, C: int, c0: float) -> int:
    """
    Rounds T = ceil(c0 / (n epsilon^2)) needed for an optimality gap of epsilon,
    where c0 was calibrated at C = b/n samples per node.
    """
    if epsilon <= 0 or n < 1 or C < 1 or c0 <= 0:
        raise InvalidParam(f"rounds_for_epsilon needs epsilon, c0 > 0 and n, C >= 1 (got {epsilon}, {n}, {C}, {c0})")
    return max(math.ceil(c0 / (n * epsilon ** 2)), 1)


def estimate_round_constant(gap: float, n: int, rounds: int) -> float:
    """c0 = gap^2 n T, from a pilot run whose gap after T rounds was `gap`."""
    if gap <= 0 or n < 1 or rounds < 1:
        raise InvalidParam(f"Pilot run needs a positive gap, n and rounds (got {gap}, {n}, {rounds})")
    return gap ** 2 * n * rounds


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset == "idx":
        return read_idx(cfg.images_path, cfg.labels_path)
    return generate_synthetic(cfg.classes, cfg.features, cfg.dataset_size, cfg.separation,
                              cfg.data_seed, noise=cfg.noise)


def _evaluation_set(dataset: Dataset, cfg: ExperimentConfig) -> Dataset:
    if cfg.eval_size <= 0 or cfg.eval_size >= dataset.size:
        return dataset
    order = np.random.default_rng(cfg.data_seed).permutation(dataset.size)[:cfg.eval_size]
    return Dataset(dataset.inputs[order], dataset.labels[order], dataset.num_classes)


def build_protocol(cfg: ExperimentConfig, model: LossModel, graph: Graph) -> tuple[AveragingProtocol, SpectralInfo]:
    P = metropolis_weights(graph)
    if cfg.lazy:
        P = lazify(P)
    spectrum = spectral_info(P)
    gap = spectrum.contraction_gap
    b = cfg.batch_size

    if cfg.protocol == "exact":
        return AveragingProtocol.exact(), spectrum
    if cfg.protocol == "isolated":
        return AveragingProtocol.isolated(), spectrum
    if cfg.protocol == "gossip_single":
        k = 1
    elif cfg.protocol == "gossip_fixed":
        k = cfg.gossip_k
    elif cfg.protocol == "gossip_auto":
        k = kstar_theorem2(model.L, b, cfg.n, cfg.gamma, gap)
    else:
        k = kstar_optimization(model.L, b, cfg.n, gap)
    logging.info(f"Protocol {cfg.protocol}: k={k} (rho={spectrum.rho:.4f}, contraction gap={gap:.4f})")
    return AveragingProtocol.gossip(P, k), spectrum


def prepare_run(cfg: ExperimentConfig) -> _RunSetup:
    """Builds everything shared by the seeds of one run."""
    dataset = load_dataset(cfg)
    model = build_loss_model(cfg.loss, dataset, cfg.radius)
    compute_reference_optimum(model, dataset, tol=cfg.optimum_tol, max_iter=cfg.optimum_max_iter)
    graph = make_graph(cfg.topology, cfg.n, cfg.graph_seed, p=cfg.edge_prob, d=cfg.degree)
    protocol, spectrum = build_protocol(cfg, model, graph)

    latency = protocol.latency(cfg.n, cfg.gamma)
    mu = cfg.n * math.ceil(latency / cfg.n)
    if mu != latency:
        logging.info(f"mu adjusted from {latency} to {mu} so that b+mu is a multiple of n={cfg.n}")
    loss_mu = mu if cfg.online else 0
    schedule = Schedule(model.K, cfg.batch_size + loss_mu)
    runtime = RuntimeModel.for_protocol(protocol, cfg.tau, graph.max_degree, cfg.batch_size, cfg.n)

    rounds = cfg.rounds
    if cfg.total_samples > 0 and cfg.epsilon <= 0:
        rounds = cfg.total_samples // (cfg.batch_size + loss_mu)
        if rounds < 1:
            raise ConfigError(f"total_samples={cfg.total_samples} is less than one round of {cfg.batch_size + loss_mu}",
                              field="total_samples")
    # w* minimizes the sampling population; only the gap is measured on the evaluation set.
    eval_set = _evaluation_set(dataset, cfg)
    eval_fstar = expected_loss(model, model.wstar, eval_set)
    return _RunSetup(dataset, eval_set, eval_fstar, model, graph, spectrum, protocol,
                     latency, mu, loss_mu, schedule, runtime, rounds)


def _run_seed(cfg: ExperimentConfig, setup: _RunSetup, seed: int, rounds: int) -> tuple[list[dict], list[RoundTrace]]:
    model, n, b = setup.model, cfg.n, cfg.batch_size
    stream = SampleStream(setup.dataset, seed)
    nodes = [NodeState.initial(model.dim) for _ in range(n)]
    ref = ReferenceState.initial(model.dim)
    ledger = RegretLedger(n)
    run_id = f"{cfg.name}-n{n}-s{seed}"
    rows, traces = [], []

    logging.info(f"Starting {run_id}: {rounds} rounds, b={b}, mu={setup.mu}, k={setup.protocol.iterations(n)}")
    for t in range(1, rounds + 1):
        nodes, trace = run_round(nodes, setup.protocol, model, setup.schedule, stream, t, b,
                                 setup.loss_mu, cfg.gamma)
        for i in range(n):
            record_regret(ledger, model, trace.node_points[i], trace.node_samples[i], node=i)
        ledger.close_round()
        ref = update_reference(ref, trace.gbar, setup.schedule, t, model.constraint)

        gap = float("nan")
        if cfg.gap_every and (t % cfg.gap_every == 0 or t == rounds):
            gap = optimality_gap(model, [node.what for node in nodes], setup.eval_set, setup.eval_fstar)
        rows.append({
            "run_id": run_id, "n": n, "b": b, "mu": setup.mu, "k": setup.protocol.iterations(n),
            "round": t, "samples_seen": ledger.samples, "regret_total": ledger.total,
            "regret_per_sample": ledger.per_sample, "delta_t": trace.delta, "gap_est": gap,
            "runtime_units": runtime_units(setup.runtime, t),
        })
        if cfg.retain_diagnostics:
            traces.append(trace)
        logging.debug(f"{run_id} round {t}: regret={ledger.total:.6g}, delta={trace.delta:.3e}")
    logging.info(f"Finished {run_id}: regret per sample {ledger.per_sample:.6g}")
    return rows, traces


def _pilot_round_constant(cfg: ExperimentConfig, setup: _RunSetup) -> float:
    pilot_rounds = max(cfg.rounds, PILOT_MIN_ROUNDS)
    pilot_cfg = replace(cfg, gap_every=pilot_rounds)
    rows, _ = _run_seed(pilot_cfg, setup, cfg.seeds[0], pilot_rounds)
    c0 = estimate_round_constant(rows[-1]["gap_est"], cfg.n, pilot_rounds)
    logging.info(f"Pilot run of {pilot_rounds} rounds calibrated c0={c0:.6g}")
    return c0


def _build_manifest(cfg: ExperimentConfig, setup: _RunSetup, rounds: int, frame: pd.DataFrame,
                    c0: float | None) -> RunManifest:
    model = setup.model
    constants = model.constants()
    manifest = RunManifest()
    manifest.update("config", cfg.to_settings())
    manifest.update("data", setup.dataset.manifest())
    manifest.update("model", constants)
    manifest.set("model.fstar", model.fstar)
    manifest.set("model.wstar_checksum", array_checksum(model.wstar))
    manifest.set("model.eval_size", setup.eval_set.size)
    manifest.set("model.eval_fstar", setup.eval_fstar)
    manifest.update("topology", {
        "kind": cfg.topology, "edges": setup.graph.num_edges, "max_degree": setup.graph.max_degree,
        "lazy": cfg.lazy, "lambda2": setup.spectrum.lambda2, "lambda_min": setup.spectrum.lambda_min,
        "rho": setup.spectrum.rho, "gap": setup.spectrum.gap,
    })
    manifest.update("protocol", {
        "policy": cfg.protocol, "k": setup.protocol.iterations(cfg.n), "latency": setup.latency,
        "mu": setup.mu, "mu_adjusted": setup.mu != setup.latency, "b_plus_mu": setup.schedule.b_plus_mu,
    })
    manifest.set("run.rounds", rounds)
    if c0 is not None:
        manifest.set("run.round_constant", c0)

    zero = np.zeros(model.dim)
    initial_gap = expected_loss(model, zero, setup.dataset) - model.fstar
    h_wstar = 0.5 * float(np.dot(model.wstar, model.wstar))
    m = int(frame["samples_seen"].max())
    delta = float(frame["delta_t"].max())
    manifest.set("bounds.delta_max", delta)
    manifest.set("bounds.regret", regret_upper_bound(constants, cfg.batch_size, setup.loss_mu, cfg.n,
                                                     delta, m, initial_gap, h_wstar))
    if not cfg.online:
        manifest.set("bounds.gap", gap_upper_bound(constants, cfg.batch_size // cfg.n, cfg.n, rounds,
                                                   initial_gap, h_wstar))
    return manifest


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None, write: bool = True) -> RunResult:
    """
    Runs every seed of the experiment and (by default) writes
    <name>-n<n>.csv and <name>-n<n>.manifest into the output directory.
    """
    setup = prepare_run(cfg)
    rounds, c0 = setup.rounds, None
    if cfg.epsilon > 0:
        c0 = cfg.round_constant if cfg.round_constant > 0 else _pilot_round_constant(cfg, setup)
        rounds = rounds_for_epsilon(cfg.epsilon, cfg.n, cfg.batch_size // cfg.n, c0)
        logging.info(f"epsilon={cfg.epsilon} needs {rounds} rounds")

    all_rows, traces = [], {}
    for seed in cfg.seeds:
        rows, seed_traces = _run_seed(cfg, setup, seed, rounds)
        all_rows.extend(rows)
        if cfg.retain_diagnostics:
            traces[seed] = seed_traces

    frame = pd.DataFrame(all_rows, columns=app_config.CSV_COLUMNS)
    result = RunResult(frame, _build_manifest(cfg, setup, rounds, frame, c0), cfg, traces)
    if write:
        target = get_output_dir(out_dir)
        stem = f"{cfg.name}-n{cfg.n}"
        result.csv_path = atomic_write_text(target / f"{stem}.csv", result.to_csv_text())
        result.manifest_path = result.manifest.save(target / f"{stem}.manifest")
        logging.info(f"Wrote {result.csv_path}")
    return result


def run_sweep(cfg: ExperimentConfig, out_dir: str | Path | None = None, write: bool = True) -> SweepResult:
    """
    Runs the experiment at every n in n_values and forms regret-per-sample
    ratios of the smallest n against each larger one.
    """
    sizes = sorted(cfg.n_values) if cfg.n_values else [cfg.n]
    results = [run_experiment(cfg.with_n(n), out_dir, write) for n in sizes]
    base = results[0].seed_mean(app_config.RATIO_COLUMN)
    ratios: dict[int, RatioCurve] = {}
    for result in results[1:]:
        curve = regret_ratio_curve(base.to_numpy(), result.seed_mean(app_config.RATIO_COLUMN).to_numpy())
        ratios[result.n] = curve
        logging.info(f"R_{sizes[0]}/R_{result.n} tail mean = {curve.tail_mean:.4f} "
                     f"(sqrt ratio {math.sqrt(result.n / sizes[0]):.4f})")
    return SweepResult(results, ratios)
