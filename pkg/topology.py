# topology.py
# © 2025 Colt McVey
# Communication graphs, Metropolis gossip weights and their spectral quantities.

import math
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import networkx as nx
import pandas as pd
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

import config
from errors import InvalidParam, ConnectivityFailure, ConvergenceFailure

GRAPH_KINDS = ("complete", "ring", "path", "grid2d", "erdos_renyi", "random_regular")


@dataclass(frozen=True)
class Graph:
    """
    An undirected, connected communication graph on nodes 0..n-1.
    Edges are stored as sorted (i, j) pairs with i < j.
    """
    n: int
    edges: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParam(f"Graph needs at least one node, got n={self.n}")
        normalized = set()
        for i, j in self.edges:
            if i == j:
                raise InvalidParam(f"Self-loop on node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidParam(f"Edge ({i}, {j}) outside node range 0..{self.n - 1}")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))
        if not nx.is_connected(self.to_networkx()):
            raise ConnectivityFailure(f"Graph with n={self.n} and {len(self.edges)} edges is not connected")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n > 1 else 0

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def to_edge_list(self) -> str:
        """Serializes as 'n m' followed by one 'i j' line per edge."""
        lines = [f"{self.n} {self.num_edges}"]
        lines += [f"{i} {j}" for i, j in sorted(self.edges)]
        return "\n".join(lines) + "\n"


def graph_from_edge_list(text: str) -> Graph:
    """Parses the edge-list text written by Graph.to_edge_list."""
    rows = [line.split() for line in text.splitlines() if line.strip()]
    if not rows or len(rows[0]) != 2:
        raise InvalidParam("Edge list must start with a 'n m' header line")
    n, m = int(rows[0][0]), int(rows[0][1])
    if len(rows) - 1 != m:
        raise InvalidParam(f"Edge list header declares {m} edges, found {len(rows) - 1}")
    edges = set()
    for row in rows[1:]:
        i, j = int(row[0]), int(row[1])
        key = (min(i, j), max(i, j))
        if key in edges:
            raise InvalidParam(f"Duplicate edge ({i}, {j})")
        edges.add(key)
    return Graph(n, frozenset(edges))


def _from_networkx(g: nx.Graph) -> Graph:
    mapping = {node: idx for idx, node in enumerate(sorted(g.nodes()))}
    edges = frozenset((mapping[u], mapping[v]) for u, v in g.edges() if u != v)
    return Graph(g.number_of_nodes(), edges)


def _grid_shape(n: int) -> tuple[int, int]:
    rows = int(math.isqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


def make_graph(kind: str, n: int, seed: int = 0, p: float = 0.5, d: int = 3) -> Graph:
    """
    Builds a connected communication graph.

    Args:
        kind: One of GRAPH_KINDS.
        n: Number of nodes.
        seed: Seed for the random kinds; the same seed always yields the same graph.
        p: Edge probability for erdos_renyi.
        d: Degree for random_regular.

    Returns:
        A connected Graph. Random kinds are resampled up to MAX_GRAPH_RETRIES
        times before ConnectivityFailure is raised.
    """
    if n < 1:
        raise InvalidParam(f"n must be at least 1, got {n}")
    if kind not in GRAPH_KINDS:
        raise InvalidParam(f"Unknown graph kind '{kind}'. Expected one of {GRAPH_KINDS}")

    if kind == "complete":
        return _from_networkx(nx.complete_graph(n))
    if kind == "ring":
        return _from_networkx(nx.cycle_graph(n) if n > 2 else nx.path_graph(n))
    if kind == "path":
        return _from_networkx(nx.path_graph(n))
    if kind == "grid2d":
        rows, cols = _grid_shape(n)
        return _from_networkx(nx.grid_2d_graph(rows, cols))

    if kind == "erdos_renyi":
        if not 0.0 < p <= 1.0:
            raise InvalidParam(f"erdos_renyi needs p in (0, 1], got {p}")
        build = lambda s: nx.gnp_random_graph(n, p, seed=s)
    else:
        if n > 1 and not (1 <= d < n):
            raise InvalidParam(f"random_regular needs 1 <= d < n, got d={d}, n={n}")
        if (d * n) % 2:
            raise InvalidParam(f"random_regular needs d*n even, got d={d}, n={n}")
        if n == 1:
            return Graph(1, frozenset())
        build = lambda s: nx.random_regular_graph(d, n, seed=s)

    rng = np.random.default_rng(seed)
    for attempt in range(1, config.MAX_GRAPH_RETRIES + 1):
        candidate = build(int(rng.integers(2**31 - 1)))
        if nx.is_connected(candidate):
            if attempt > 1:
                logging.info(f"{kind} graph (n={n}, seed={seed}) connected after {attempt} attempts")
            return _from_networkx(candidate)
    raise ConnectivityFailure(
        f"No connected {kind} graph with n={n} after {config.MAX_GRAPH_RETRIES} attempts (seed={seed})"
    )


@dataclass(frozen=True)
class WeightMatrix:
    """A symmetric doubly-stochastic gossip matrix. The stored array is read-only."""
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InvalidParam(f"Weight matrix must be square, got shape {entries.shape}")
        tol = config.STOCHASTIC_TOL
        if entries.min() < -tol or entries.max() > 1 + tol:
            raise InvalidParam("Weight matrix entries must lie in [0, 1]")
        if np.abs(entries.sum(axis=1) - 1).max() > tol or np.abs(entries.sum(axis=0) - 1).max() > tol:
            raise InvalidParam("Weight matrix is not doubly stochastic")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def matches_graph(self, g: Graph) -> bool:
        """True iff P[i][j] > 0 exactly on the diagonal and on the edges of g."""
        expected = np.eye(g.n, dtype=bool)
        for i, j in g.edges:
            expected[i, j] = expected[j, i] = True
        return g.n == self.n and np.array_equal(self.entries > 0, expected)

    def to_csv(self, path: str | Path) -> Path:
        pd.DataFrame(self.entries).to_csv(path, header=False, index=False, float_format=config.CSV_FLOAT_FORMAT)
        return Path(path)


def metropolis_weights(g: Graph) -> WeightMatrix:
    """Metropolis-Hastings weights: 1/(1+max(deg_i, deg_j)) per edge, remainder on the diagonal."""
    deg = g.degrees
    P = np.zeros((g.n, g.n))
    for i, j in g.edges:
        P[i, j] = P[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return WeightMatrix(P)


def lazify(P: WeightMatrix) -> WeightMatrix:
    """Returns (I + P)/2, whose eigenvalues (1 + λ)/2 are all nonnegative."""
    return WeightMatrix((np.eye(P.n) + P.entries) / 2.0)


@dataclass(frozen=True)
class SpectralInfo:
    lambda2: float
    lambda_min: float
    rho: float
    gap: float

    @property
    def contraction_gap(self) -> float:
        """1 - rho, the rate every contraction bound in the simulator is stated with."""
        return 1.0 - self.rho


def _extreme_eigenvalues(P: WeightMatrix) -> tuple[float, float]:
    """Second-largest and smallest eigenvalue of a symmetric stochastic matrix."""
    if P.n <= config.DENSE_EIGEN_LIMIT:
        eigs = np.linalg.eigvalsh(P.entries)
        return float(eigs[-2]), float(eigs[0])

    A = sparse.csr_matrix(P.entries)
    try:
        top = sparse_linalg.eigsh(A, k=2, which="LA", tol=1e-12, return_eigenvectors=False)
        bottom = sparse_linalg.eigsh(A, k=1, which="SA", tol=1e-12, return_eigenvectors=False)
    except sparse_linalg.ArpackNoConvergence as e:
        raise ConvergenceFailure(f"Lanczos eigensolve did not converge for n={P.n}: {e}") from e
    return float(np.sort(top)[0]), float(bottom[0])


def spectral_info(P: WeightMatrix) -> SpectralInfo:
    """
    Computes lambda2, lambda_min, rho = max(lambda2, |lambda_min|) and gap = 1 - lambda2.
    A single node has nothing to mix, so it reports lambda2 = rho = 0.
    """
    if P.n == 1:
        return SpectralInfo(lambda2=0.0, lambda_min=0.0, rho=0.0, gap=1.0)

    lambda2, lambda_min = _extreme_eigenvalues(P)
    # Round-off can push a zero eigenvalue slightly negative.
    lambda2 = max(lambda2, 0.0)
    rho = max(lambda2, abs(lambda_min))
    if rho >= 1.0:
        raise ConvergenceFailure(f"Weight matrix does not contract (rho={rho:.6g}); is the graph connected?")
    info = SpectralInfo(lambda2=lambda2, lambda_min=lambda_min, rho=rho, gap=1.0 - lambda2)
    logging.debug(f"Spectrum n={P.n}: lambda2={lambda2:.6g}, lambda_min={lambda_min:.6g}, rho={rho:.6g}")
    return info
