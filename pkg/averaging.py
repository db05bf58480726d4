# averaging.py
# © 2025 Colt McVey
# Exact and gossip distributed averaging, plus the gossip iteration-count calculators.

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from errors import InvalidParam, DimensionMismatch, ProtocolError
from topology import WeightMatrix


class ProtocolKind(str, Enum):
    EXACT = "exact"
    GOSSIP = "gossip"
    NONE = "none"


@dataclass(frozen=True)
class AveragingProtocol:
    """
    How the nodes combine their vectors each round. `exact` models a
    spanning-tree AllReduce, `gossip` applies y <- P y exactly k times and
    `none` leaves every node with its own vector (no-communication baseline).
    """
    kind: ProtocolKind
    k: int = 0
    weights: WeightMatrix | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        if self.kind is ProtocolKind.GOSSIP:
            if self.weights is None:
                raise ProtocolError("Gossip protocol needs a weight matrix")
            if self.k < 1:
                raise ProtocolError(f"Gossip protocol needs k >= 1, got k={self.k}")

    @classmethod
    def exact(cls) -> "AveragingProtocol":
        return cls(ProtocolKind.EXACT)

    @classmethod
    def gossip(cls, weights: WeightMatrix, k: int) -> "AveragingProtocol":
        return cls(ProtocolKind.GOSSIP, k=k, weights=weights)

    @classmethod
    def isolated(cls) -> "AveragingProtocol":
        return cls(ProtocolKind.NONE)

    def iterations(self, n: int) -> int:
        """Communication steps per invocation: k for gossip, tree depth for exact."""
        if self.kind is ProtocolKind.GOSSIP:
            return self.k
        if self.kind is ProtocolKind.EXACT:
            return tree_depth(n)
        return 0

    def latency(self, n: int, gamma: int) -> int:
        """Samples arriving network-wide while the protocol runs (mu)."""
        return gamma * self.iterations(n)


def tree_depth(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


@dataclass(frozen=True)
class AveragingReport:
    outputs: np.ndarray
    true_average: np.ndarray
    accuracy_achieved: float
    latency: int
    k: int
    delta_target: float | None = None

    def to_csv_row(self) -> dict:
        return {
            "k": self.k,
            "delta_target": self.delta_target if self.delta_target is not None else float("nan"),
            "delta_achieved": self.accuracy_achieved,
            "mu": self.latency,
        }


def _as_node_matrix(inputs) -> np.ndarray:
    if isinstance(inputs, np.ndarray):
        Y = np.array(inputs, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
    else:
        rows = [np.atleast_1d(np.asarray(v, dtype=float)) for v in inputs]
        if not rows:
            raise DimensionMismatch("No node inputs given")
        dims = {r.shape for r in rows}
        if len(dims) != 1:
            raise DimensionMismatch(f"Node inputs have differing shapes: {sorted(dims)}")
        Y = np.vstack(rows)
    if Y.ndim != 2 or Y.shape[0] == 0 or Y.shape[1] == 0:
        raise DimensionMismatch(f"Expected one vector of dimension >= 1 per node, got shape {Y.shape}")
    return Y


def run_averaging(proto: AveragingProtocol, inputs, gamma: int = 1,
                  delta_target: float | None = None) -> AveragingReport:
    """
    Runs one invocation of the averaging protocol over per-node vectors.

    Args:
        proto: The protocol to run.
        inputs: An (n, d) array or a sequence of n vectors of equal dimension.
        gamma: Samples arriving network-wide per communication step.
        delta_target: Optional accuracy target, echoed into the report.

    Returns:
        An AveragingReport with per-node outputs, the true average, the
        achieved accuracy max_i ||y_i+ - ybar|| and the latency mu.
    """
    Y = _as_node_matrix(inputs)
    n = Y.shape[0]
    ybar = Y.mean(axis=0)

    if proto.kind is ProtocolKind.EXACT:
        outputs = np.tile(ybar, (n, 1))
    elif proto.kind is ProtocolKind.NONE:
        outputs = Y.copy()
    else:
        if proto.weights.n != n:
            raise DimensionMismatch(f"Weight matrix is {proto.weights.n}x{proto.weights.n} but {n} nodes supplied inputs")
        P = proto.weights.entries
        outputs = Y
        for _ in range(proto.k):
            outputs = P @ outputs

    accuracy = float(np.linalg.norm(outputs - ybar, axis=1).max())
    return AveragingReport(
        outputs=outputs,
        true_average=ybar,
        accuracy_achieved=accuracy,
        latency=proto.latency(n, gamma),
        k=proto.iterations(n),
        delta_target=delta_target,
    )


def gossip_iterations_for_accuracy(delta: float, n: int, max_spread: float, gap: float) -> int:
    """Smallest k with k >= log(2 sqrt(n) maxSpread / delta) / gap, at least 1."""
    if delta <= 0 or max_spread <= 0 or n < 1:
        raise InvalidParam(f"delta, maxSpread and n must be positive (got {delta}, {max_spread}, {n})")
    if not 0 < gap <= 1:
        raise InvalidParam(f"gap must lie in (0, 1], got {gap}")
    k = math.ceil(math.log(2 * math.sqrt(n) * max_spread / delta) / gap)
    return max(k, 1)


def _check_positive(**values):
    for name, value in values.items():
        if value <= 0:
            raise InvalidParam(f"{name} must be positive, got {value}")


def kstar_theorem2(L: float, b: int, n: int, gamma: int, gap: float) -> int:
    """
    Gossip iterations per round that keep every node within 1/(b + gamma k)
    of the network-average dual variable (online prediction setting).
    """
    _check_positive(L=L, b=b, n=n, gamma=gamma, gap=gap)
    if gamma >= b:
        raise InvalidParam(f"gamma must be smaller than b (got gamma={gamma}, b={b})")
    if gap > 1:
        raise InvalidParam(f"gap must lie in (0, 1], got {gap}")
    core = (math.log(4 * L * b * math.sqrt(n)) + math.log(1 / gap)) / gap + 1 / (2 * L * b) + 1
    return max(math.ceil(core / (1 - gamma / b)), 1)


def kstar_optimization(L: float, b: int, n: int, gap: float) -> int:
    """
    Gossip iterations per round that keep every node within 1/b of the
    average dual variable when no samples arrive during communication.
    """
    _check_positive(L=L, b=b, n=n, gap=gap)
    if gap > 1:
        raise InvalidParam(f"gap must lie in (0, 1], got {gap}")
    k = math.ceil(math.log(2 * b * math.sqrt(n) * (1 / b + 2 * L)) / gap)
    return max(k, 1)


def fixed_point_map(x: float, L: float, b: int, n: int, gamma: int, gap: float) -> float:
    """phi(x) = log(2 sqrt(n) (1 + 2Lb + 2L gamma x)) / gap."""
    return math.log(2 * math.sqrt(n) * (1 + 2 * L * b + 2 * L * gamma * x)) / gap


def verify_fixed_point(kstar: int, L: float, b: int, n: int, gamma: int, gap: float) -> bool:
    """True iff kstar >= phi(kstar), i.e. kstar gossip rounds restore the 1/(b+mu) accuracy."""
    return kstar >= fixed_point_map(kstar, L, b, n, gamma, gap)
