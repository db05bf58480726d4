# metrics.py
# © 2025 Colt McVey
# Regret and optimality-gap accounting, the runtime model and scaling-law helpers.

import math
import logging
from dataclasses import dataclass, field

import numpy as np

from averaging import AveragingProtocol, ProtocolKind, tree_depth
from errors import InvalidParam, LengthMismatch
from losses import LossModel, expected_loss

TAIL_FRACTION = 0.25


@dataclass
class RegretLedger:
    """
    Cumulative excess loss f(w_i(t), x) - f(w*, x) per node. Single writer:
    the run that owns it.
    """
    n: int
    per_node: np.ndarray | None = field(default=None)
    samples: int = 0
    rounds: int = 0

    def __post_init__(self):
        if self.per_node is None:
            self.per_node = np.zeros(self.n)

    @property
    def total(self) -> float:
        return float(self.per_node.sum())

    @property
    def per_sample(self) -> float:
        return self.total / self.samples if self.samples else 0.0

    def close_round(self) -> "RegretLedger":
        self.rounds += 1
        return self

    @classmethod
    def merge(cls, ledgers: list["RegretLedger"]) -> "RegretLedger":
        """Network ledger whose per-node entries are the totals of the given ledgers."""
        merged = cls(len(ledgers), np.array([l.total for l in ledgers]))
        merged.samples = sum(l.samples for l in ledgers)
        merged.rounds = max((l.rounds for l in ledgers), default=0)
        return merged


def record_regret(ledger: RegretLedger, model: LossModel, predictor: np.ndarray, sample, node: int = 0) -> RegretLedger:
    """Adds f(predictor, x) - f(w*, x) for the sample (or every sample of a batch) to the node's sum."""
    model.require_reference()
    batch = model.as_batch(sample)
    increment = model.losses(predictor, batch) - model.losses(model.wstar, batch)
    ledger.per_node[node] += float(np.sum(increment))
    ledger.samples += len(batch)
    return ledger


def optimality_gap(model: LossModel, what_per_node, eval_set, fstar: float | None = None) -> float:
    """
    max_i F(what_i) - F(w*), with F the empirical mean over eval_set.
    Pass fstar = F(w*) on eval_set when it was already computed for the run.
    """
    model.require_reference()
    if fstar is None:
        fstar = expected_loss(model, model.wstar, eval_set)
    return max(expected_loss(model, w, eval_set) for w in what_per_node) - fstar


@dataclass(frozen=True)
class RuntimeModel:
    """
    Time in units where processing one sample costs 1. A round costs b/n
    units of computation plus tau per dual-vector transmission.
    """
    tau: float
    deg_g: int
    k: int
    b: int
    n: int
    protocol: ProtocolKind = ProtocolKind.GOSSIP

    @classmethod
    def for_protocol(cls, proto: AveragingProtocol, tau: float, max_degree: int, b: int, n: int) -> "RuntimeModel":
        if proto.kind is ProtocolKind.EXACT:
            # Spanning-tree AllReduce: one transmission per tree level.
            return cls(tau, 1, tree_depth(n), b, n, ProtocolKind.EXACT)
        if proto.kind is ProtocolKind.NONE:
            return cls(tau, 0, 0, b, n, ProtocolKind.NONE)
        return cls(tau, max_degree, proto.k, b, n, ProtocolKind.GOSSIP)

    @property
    def time_per_round(self) -> float:
        return self.b / self.n + self.tau * self.k * self.deg_g


def runtime_units(model_r: RuntimeModel, rounds: int) -> float:
    """T * (b/n + tau * k * deg(G))."""
    if model_r.b <= 0 or model_r.n <= 0 or model_r.tau < 0 or rounds < 0:
        raise InvalidParam("Runtime model needs positive b, n and nonnegative tau, rounds")
    if model_r.protocol is ProtocolKind.GOSSIP and model_r.k <= 0:
        raise InvalidParam("Gossip runtime needs k >= 1; exact averaging is modeled via RuntimeModel.for_protocol")
    return rounds * model_r.time_per_round


@dataclass(frozen=True)
class RatioCurve:
    ratios: np.ndarray
    tail_mean: float


def regret_ratio_curve(result_a, result_b, tail_fraction: float = TAIL_FRACTION) -> RatioCurve:
    """
    Elementwise R_A(T)/R_B(T) per round and its mean over the final
    tail_fraction of rounds. Inputs are per-round regret series; runs use
    regret per sample so that networks of different size compare at equal T.
    """
    a = np.asarray(result_a, dtype=float)
    b = np.asarray(result_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"Regret series have shapes {a.shape} and {b.shape}")
    if a.size == 0:
        raise LengthMismatch("Regret series are empty")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(b != 0, a / b, np.where(a == 0, 1.0, np.nan))
    start = min(int(math.floor(a.size * (1 - tail_fraction))), a.size - 1)
    tail = ratios[start:]
    if not np.isfinite(tail).all():
        logging.warning("Regret ratio tail contains non-finite entries; they are excluded from the mean")
    finite = tail[np.isfinite(tail)]
    return RatioCurve(ratios, float(finite.mean()) if finite.size else float("nan"))


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x over the positive entries."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"x and y have shapes {x.shape} and {y.shape}")
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise InvalidParam("Need at least two positive points to fit a slope")
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


def regret_upper_bound(constants: dict, b: int, mu: int, n: int, delta: float, m: int,
                       initial_gap: float, h_wstar: float) -> float:
    """Expected-regret bound for an averaging protocol of accuracy delta and latency mu."""
    L, K, sigma2, D = constants["L"], constants["K"], constants["sigma2"], constants["D"]
    bm = b + mu
    head = bm * (initial_gap + K * h_wstar) + 0.75 * delta ** 2 * K ** 2 * bm ** 2.5
    slope = 2 * sigma2 * bm / b + 2 * delta * K * D * bm / n + 2 * delta * L * bm
    return head + slope * math.sqrt(m)


def gap_upper_bound(constants: dict, C: int, n: int, T: int, initial_gap: float, h_wstar: float) -> float:
    """Optimality-gap bound after T rounds with b = C n and accuracy 1/b per round."""
    L, K, sigma2, D = constants["L"], constants["K"], constants["sigma2"], constants["D"]
    root = math.sqrt(C * n)
    head = initial_gap + K * h_wstar + 3 * K ** 2 / (4 * root)
    slope = sigma2 / (4 * root) + 2 * K * D / (n * root) + 2 * L / root
    return head / T + slope / math.sqrt(T)
