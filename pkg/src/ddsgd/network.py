"""Graph topologies and symmetric doubly-stochastic mixing matrices."""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np


class TopologyError(ValueError):
    """Infeasible topology parameters."""


class GenerationError(RuntimeError):
    """A random topology could not be made connected within the retry budget."""


class MixingError(ValueError):
    """A mixing matrix violates one of the required assumptions."""


@dataclass(frozen=True)
class NetworkTopology:
    """Undirected simple connected graph on nodes ``0..m-1``."""

    m: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.m < 1:
            raise TopologyError("a topology needs at least one node")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise TopologyError(f"self-loop at node {i}")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise TopologyError(f"edge ({i}, {j}) out of range for m={self.m}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))
        if not self.is_connected():
            raise TopologyError("graph is not connected")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.m, self.m), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def is_connected(self) -> bool:
        seen = {0}
        nbrs = [[] for _ in range(self.m)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        stack = [0]
        while stack:
            for k in nbrs[stack.pop()]:
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
        return len(seen) == self.m

    def sorted_edges(self) -> list:
        return sorted(self.edges)


def lattice2d(rows: int, cols: int) -> NetworkTopology:
    if rows < 1 or cols < 1:
        raise TopologyError("lattice dimensions must be positive")
    edges = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.append((k, k + 1))
            if r + 1 < rows:
                edges.append((k, k + cols))
    return NetworkTopology(rows * cols, frozenset(edges))


def ring(m: int) -> NetworkTopology:
    if m < 1:
        raise TopologyError("ring needs m >= 1")
    if m == 1:
        return NetworkTopology(1)
    if m == 2:
        return NetworkTopology(2, frozenset({(0, 1)}))
    return NetworkTopology(m, frozenset((i, (i + 1) % m) for i in range(m)))


def complete(m: int) -> NetworkTopology:
    if m < 1:
        raise TopologyError("complete graph needs m >= 1")
    return NetworkTopology(m, frozenset((i, j) for i in range(m) for j in range(i + 1, m)))


def kregular(m: int, k: int, seed: int = 0, max_attempts: int = 100) -> NetworkTopology:
    """Random connected ``k``-regular graph; reseeds until connected."""
    if m < 1 or k < 0:
        raise TopologyError("kregular needs m >= 1, k >= 0")
    if k >= m:
        raise TopologyError(f"kregular needs k < m (got k={k}, m={m})")
    if (m * k) % 2:
        raise TopologyError(f"kregular needs m*k even (got m={m}, k={k})")
    for attempt in range(max_attempts):
        g = nx.random_regular_graph(k, m, seed=seed + attempt)
        if m == 1 or (g.number_of_nodes() == m and nx.is_connected(g)):
            return NetworkTopology(m, frozenset(g.edges()))
    raise GenerationError(f"no connected {k}-regular graph on {m} nodes after {max_attempts} attempts")


def build_topology(kind: str, seed: int = 0, **params) -> NetworkTopology:
    """Dispatch on ``kind`` in {lattice2d, ring, kregular, complete}."""
    try:
        if kind == "lattice2d":
            return lattice2d(int(params["rows"]), int(params["cols"]))
        if kind == "ring":
            return ring(int(params["m"]))
        if kind == "complete":
            return complete(int(params["m"]))
        if kind == "kregular":
            return kregular(int(params["m"]), int(params["k"]), seed=seed)
    except KeyError as exc:
        raise TopologyError(f"topology '{kind}' is missing parameter {exc}") from None
    raise TopologyError(f"unknown topology kind '{kind}'")


@dataclass(frozen=True)
class MixingMatrix:
    W: np.ndarray
    lam: float

    @property
    def m(self) -> int:
        return self.W.shape[0]


def spectral_gap(W) -> float:
    """Return ``||W - J||_2`` via a symmetric eigendecomposition.

    For a symmetric PSD doubly-stochastic ``W`` this is its second-largest
    eigenvalue.
    """
    W = W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    m = W.shape[0]
    ev = np.linalg.eigvalsh(W - np.full((m, m), 1.0 / m))
    return float(max(abs(ev[0]), abs(ev[-1]))) if m > 1 else 0.0


def metropolis_mixing(topology: NetworkTopology, lazy: bool = False) -> MixingMatrix:
    """Metropolis-Hastings weights ``1/(1+max(deg_i, deg_j))`` on each edge.

    Raises :class:`MixingError` if the raw matrix is indefinite and ``lazy`` is
    false; with ``lazy`` the matrix ``(I + W)/2`` is returned.
    """
    m = topology.m
    deg = topology.degrees()
    W = np.zeros((m, m))
    for i, j in topology.edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    W[np.diag_indices(m)] = 1.0 - W.sum(axis=1)
    if lazy:
        W = 0.5 * (np.eye(m) + W)
    else:
        lo = np.linalg.eigvalsh(W)[0]
        if lo < -1e-10:
            raise MixingError(
                f"Metropolis matrix has eigenvalue {lo:.3g} < 0; use lazy=True for (I+W)/2"
            )
    return MixingMatrix(W, spectral_gap(W))


def uniform_complete_mixing(m: int) -> MixingMatrix:
    """``W = J`` on the complete graph (one-step averaging)."""
    return MixingMatrix(np.full((m, m), 1.0 / m), 0.0)


def make_mixing(topology: NetworkTopology, kind: str = "metropolis", lazy: bool = True) -> MixingMatrix:
    if kind == "metropolis":
        return metropolis_mixing(topology, lazy=lazy)
    if kind == "uniform-complete":
        if len(topology.edges) != topology.m * (topology.m - 1) // 2:
            raise MixingError("uniform-complete mixing requires a complete graph")
        return uniform_complete_mixing(topology.m)
    raise MixingError(f"unknown mixing kind '{kind}'")


def validate_mixing(W, topology: NetworkTopology, tol: float = 1e-12) -> dict:
    """Check the mixing assumptions; returns ``{check: (passed, detail)}``."""
    W = W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    if W.shape != (topology.m, topology.m):
        raise MixingError(f"W has shape {W.shape}, topology has m={topology.m}")
    m = topology.m
    allowed = topology.adjacency() | np.eye(m, dtype=bool)
    asym = float(np.max(np.abs(W - W.T))) if m else 0.0
    rowdev = float(np.max(np.abs(W.sum(axis=1) - 1.0)))
    offpattern = float(np.max(np.where(allowed, 0.0, np.abs(W)))) if m > 1 else 0.0
    neg = float(min(W.min(), 0.0))
    eigmin = float(np.linalg.eigvalsh(0.5 * (W + W.T))[0])
    lam = spectral_gap(0.5 * (W + W.T))
    complete_graph = len(topology.edges) == m * (m - 1) // 2
    lam_ok = (0.0 < lam < 1.0) or (complete_graph and 0.0 <= lam < 1.0)
    return {
        "symmetric": (asym <= tol, f"max|W-W^T| = {asym:.3g}"),
        "row_sums": (rowdev <= tol, f"max|W1-1| = {rowdev:.3g}"),
        "sparsity": (offpattern == 0.0 and neg >= 0.0, f"max off-graph weight {offpattern:.3g}, min weight {neg:.3g}"),
        "psd": (eigmin >= -1e-10, f"min eigenvalue {eigmin:.3g}"),
        "spectral_gap": (lam_ok, f"lambda = {lam:.12g}"),
    }


def write_edge_list(topology: NetworkTopology, path) -> None:
    lines = [str(topology.m)] + [f"{i} {j}" for i, j in topology.sorted_edges()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edge_list(path) -> NetworkTopology:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not rows or len(rows[0]) != 1:
        raise TopologyError("edge list must start with a line holding m")
    m = int(rows[0][0])
    edges = []
    for row in rows[1:]:
        if len(row) != 2:
            raise TopologyError(f"bad edge line: {' '.join(row)}")
        edges.append((int(row[0]), int(row[1])))
    if len(set(tuple(sorted(e)) for e in edges)) != len(edges):
        raise TopologyError("duplicate edge in edge list")
    return NetworkTopology(m, frozenset(edges))
