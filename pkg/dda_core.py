# dda_core.py
# © 2025 Colt McVey
# The distributed dual-averaging engine and the exact reference sequences used by the analysis.

import logging
from dataclasses import dataclass, replace

import numpy as np

from averaging import AveragingProtocol, run_averaging
from data import SampleBatch, SampleStream
from errors import InvalidParam, EmptyBatch, DimensionMismatch, SamplesNotRetained
from losses import ConstraintSet, LossModel


@dataclass(frozen=True)
class NodeState:
    """Primal point w, dual vector z and running average what of node i at round t."""
    w: np.ndarray
    z: np.ndarray
    what: np.ndarray
    rounds_seen: int = 1

    @classmethod
    def initial(cls, dim: int) -> "NodeState":
        return cls(np.zeros(dim), np.zeros(dim), np.zeros(dim), 1)


@dataclass(frozen=True)
class Schedule:
    """beta(t) = K + sqrt(t / (b + mu)); b_plus_mu is b alone in optimization mode."""
    K: float
    b_plus_mu: int

    def __post_init__(self):
        if self.K < 0 or self.b_plus_mu <= 0:
            raise InvalidParam(f"Schedule needs K >= 0 and b+mu > 0 (got {self.K}, {self.b_plus_mu})")

    def a(self, t: int) -> float:
        return float(np.sqrt(t / self.b_plus_mu))

    def beta(self, t: int) -> float:
        return self.K + self.a(t)


@dataclass(frozen=True)
class ReferenceState:
    """Network-average dual zbar, its projection wbar and the running mean whatbar."""
    zbar: np.ndarray
    wbar: np.ndarray
    whatbar: np.ndarray
    rounds_seen: int = 1

    @classmethod
    def initial(cls, dim: int) -> "ReferenceState":
        return cls(np.zeros(dim), np.zeros(dim), np.zeros(dim), 1)


@dataclass(frozen=True)
class RoundTrace:
    """
    Diagnostics of one round. node_points/node_duals are w_i(t), z_i(t) going
    into the round; node_samples holds each node's draws (gradient samples
    first) and is None once diagnostics are stripped.
    """
    round: int
    delta: float
    gbar: np.ndarray
    zbar_next: np.ndarray
    node_losses: np.ndarray
    node_points: np.ndarray
    node_duals: np.ndarray
    batch_per_node: int
    extra_per_node: int
    k: int
    mu: int
    node_samples: tuple | None = None

    def without_samples(self) -> "RoundTrace":
        return replace(self, node_samples=None)

    def gradient_samples(self) -> SampleBatch:
        if self.node_samples is None:
            raise SamplesNotRetained(f"Round {self.round} samples were not retained")
        return SampleBatch.concat([s.head(self.batch_per_node) for s in self.node_samples])


def local_minibatch_gradient(model: LossModel, w: np.ndarray, samples: SampleBatch) -> np.ndarray:
    """Mean of the per-sample gradients at the node's fixed predictor w."""
    if samples is None or len(samples) == 0:
        raise EmptyBatch("Local mini-batch is empty")
    return model.mean_gradient(w, samples)


def proximal_projection(z: np.ndarray, beta: float, constraint: ConstraintSet) -> np.ndarray:
    """argmin over the ball of <w, z> + beta/2 ||w||^2, i.e. the projection of -z/beta."""
    if beta <= 0:
        raise InvalidParam(f"beta must be positive, got {beta}")
    return constraint.project(-np.asarray(z, dtype=float) / beta)


def _running_mean(mean: np.ndarray, value: np.ndarray, count: int) -> np.ndarray:
    return mean + (value - mean) / count


def run_round(nodes: list[NodeState], proto: AveragingProtocol, model: LossModel, schedule: Schedule,
              sampler: SampleStream, t: int, batch_size: int, extra_samples: int = 0,
              gamma: int = 1) -> tuple[list[NodeState], RoundTrace]:
    """
    Executes round t of distributed dual averaging.

    Args:
        nodes: States of all n nodes, each at round t.
        proto: Averaging protocol used on z_i(t) + g_i(t).
        model: Loss model supplying gradients and the constraint set.
        schedule: The beta(t) schedule.
        sampler: Keyed sample stream.
        t: Round index, starting at 1.
        batch_size: b, samples network-wide feeding the gradients.
        extra_samples: mu, samples network-wide that only incur loss.
        gamma: Samples arriving per communication step (reported latency).

    Returns:
        The nodes at round t+1 and the round's RoundTrace.
    """
    n = len(nodes)
    if batch_size % n or extra_samples % n:
        raise InvalidParam(f"b={batch_size} and mu={extra_samples} must both be multiples of n={n}")
    if any(node.rounds_seen != t for node in nodes):
        raise InvalidParam(f"All nodes must be at round {t}")
    per_node_b, per_node_mu = batch_size // n, extra_samples // n

    W = np.vstack([node.w for node in nodes])
    Z = np.vstack([node.z for node in nodes])
    if W.shape[1] != model.dim:
        raise DimensionMismatch(f"Node state dimension {W.shape[1]} does not match model dimension {model.dim}")

    G = np.empty_like(Z)
    losses = np.empty(n)
    samples = []
    for i in range(n):
        drawn = sampler.draw(t, i, per_node_b + per_node_mu)
        samples.append(drawn)
        G[i] = local_minibatch_gradient(model, W[i], drawn.head(per_node_b))
        losses[i] = float(np.sum(model.losses(W[i], drawn)))

    report = run_averaging(proto, Z + G, gamma)
    Z_next = report.outputs
    zbar_next = Z_next.mean(axis=0)
    delta = float(np.linalg.norm(Z_next - zbar_next, axis=1).max())

    beta_next = schedule.beta(t + 1)
    updated = []
    for i, node in enumerate(nodes):
        w_next = proximal_projection(Z_next[i], beta_next, model.constraint)
        updated.append(NodeState(w_next, Z_next[i].copy(), _running_mean(node.what, w_next, t + 1), t + 1))

    trace = RoundTrace(
        round=t, delta=delta, gbar=G.mean(axis=0), zbar_next=zbar_next, node_losses=losses,
        node_points=W, node_duals=Z, batch_per_node=per_node_b, extra_per_node=per_node_mu,
        k=report.k, mu=extra_samples, node_samples=tuple(samples),
    )
    logging.debug(f"Round {t}: delta={delta:.3e}, beta(t+1)={beta_next:.4f}")
    return updated, trace


def update_reference(ref: ReferenceState, gbar: np.ndarray, schedule: Schedule, t: int,
                     constraint: ConstraintSet) -> ReferenceState:
    """Advances zbar(t+1) = zbar(t) + gbar(t) and its projection wbar(t+1)."""
    gbar = np.asarray(gbar, dtype=float)
    if gbar.shape != ref.zbar.shape:
        raise DimensionMismatch(f"gbar has shape {gbar.shape}, reference state has {ref.zbar.shape}")
    zbar = ref.zbar + gbar
    wbar = proximal_projection(zbar, schedule.beta(t + 1), constraint)
    return ReferenceState(zbar, wbar, _running_mean(ref.whatbar, wbar, t + 1), t + 1)


def error_vectors(trace: RoundTrace, model: LossModel, ref: ReferenceState, samples) -> tuple[np.ndarray, np.ndarray]:
    """
    Gradient error vectors of round t, with ref holding wbar(t):
    q = ghat - grad F(wbar) and r = gbar - ghat, where ghat averages the
    round's gradient samples at wbar(t). `samples` stands in for the population.
    """
    population = samples.as_batch() if hasattr(samples, "as_batch") else samples
    ghat = model.mean_gradient(ref.wbar, trace.gradient_samples())
    grad_F = model.mean_gradient(ref.wbar, population)
    return ghat - grad_F, trace.gbar - ghat
