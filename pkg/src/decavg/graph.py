"""Network topologies and Metropolis-Hastings mixing matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "MixingMatrix",
    "TopologyError",
    "build_topology",
    "metropolis_weights",
    "second_largest_singular",
    "read_edge_list",
    "write_edge_list",
]

TOPOLOGY_KINDS = ("cycle", "complete", "mod_ring", "edge_list")


class TopologyError(ValueError):
    """Invalid or disconnected network description."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on agents ``1..n``.

    Edges are stored as sorted 1-based pairs ``(i, j)`` with ``i < j``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError(f"agent count must be positive, got {self.n}")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise TopologyError(f"self-loop at agent {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise TopologyError(f"edge ({i}, {j}) has endpoint outside 1..{self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            A[i - 1, j - 1] = A[j - 1, i - 1] = True
        return A

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def neighbors(self, i: int) -> list[int]:
        """1-based neighbors of agent ``i``."""
        return sorted({b for a, b in self.edges if a == i} | {a for a, b in self.edges if b == i})

    def components(self) -> list[list[int]]:
        """Connected components as sorted lists of 1-based agent ids."""
        A = self.adjacency()
        seen = np.zeros(self.n, dtype=bool)
        comps = []
        for start in range(self.n):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                k = stack.pop()
                comp.append(int(k) + 1)
                for nb in np.flatnonzero(A[k]):
                    if not seen[nb]:
                        seen[nb] = True
                        stack.append(nb)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) == 1


@dataclass(frozen=True)
class MixingMatrix:
    """Doubly stochastic weight matrix with cached ``beta = sigma_2(P)``."""

    weights: np.ndarray
    beta: float

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def lambda2(self) -> float:
        """Second largest eigenvalue (signed) of the symmetric weight matrix."""
        ev = np.sort(np.linalg.eigvalsh(0.5 * (self.weights + self.weights.T)))[::-1]
        return float(ev[1]) if ev.size > 1 else 0.0

    def check(self, tol: float = 1e-12) -> None:
        """Raise ``TopologyError`` if any mixing-matrix invariant fails."""
        P = self.weights
        if np.any(np.abs(P.sum(axis=1) - 1.0) > tol):
            raise TopologyError("rows do not sum to one")
        if np.any(np.abs(P.sum(axis=0) - 1.0) > tol):
            raise TopologyError("columns do not sum to one")
        if np.any(np.diag(P) <= 0):
            raise TopologyError("diagonal must be strictly positive")
        if np.any(P < 0):
            raise TopologyError("negative weight")


def _ring_edges(n):
    return {(i, i % n + 1) for i in range(1, n + 1)}


def build_topology(kind: str, n: int, extra=None) -> Graph:
    """Build a connected graph of the requested kind.

    Parameters
    ----------
    kind : {"cycle", "complete", "mod_ring", "edge_list"}
    n : int
        Number of agents, at least 2.
    extra : iterable of (int, int), optional
        1-based edge list, required for ``kind="edge_list"``.
    """
    if kind not in TOPOLOGY_KINDS:
        raise TopologyError(f"unknown topology kind {kind!r}")
    if n < 2:
        raise TopologyError(f"need at least 2 agents, got {n}")

    if kind == "cycle":
        edges = {(min(a, b), max(a, b)) for a, b in _ring_edges(n) if a != b}
    elif kind == "complete":
        edges = {(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)}
    elif kind == "mod_ring":
        if n != 8:
            raise TopologyError("mod_ring is defined for n = 8 only")
        # directed neighbour sets, symmetrized below
        edges = set()
        for i in range(1, 9):
            for j in mod_ring_targets(i):
                if j != i:
                    edges.add((min(i, j), max(i, j)))
    else:
        if extra is None:
            raise TopologyError("edge_list topology requires an edge list")
        edges = {tuple(e) for e in extra}

    g = Graph(n, frozenset(edges))
    comps = g.components()
    if len(comps) > 1:
        raise TopologyError(f"graph is disconnected; component {comps[-1]} is unreachable from agent 1")
    return g


def mod_ring_targets(i: int) -> list[int]:
    """Directed neighbour set of agent ``i`` in the 8-node synthetic-data network."""
    return [1 + i % 8, 1 + (i + 3) % 8, 1 + (i + 6) % 8]


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis-Hastings weights ``1 / (1 + max(deg_i, deg_j))`` on edges."""
    if not g.is_connected():
        raise TopologyError("Metropolis-Hastings weights need a connected graph")
    deg = g.degrees()
    P = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w = 1.0 / (1.0 + max(deg[i - 1], deg[j - 1]))
        P[i - 1, j - 1] = P[j - 1, i - 1] = w
    # residual diagonal keeps rows exactly stochastic
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    mix = MixingMatrix(P, second_largest_singular(P))
    mix.check()
    return mix


def second_largest_singular(P) -> float:
    """Second largest singular value of a square matrix.

    Symmetric inputs go through ``eigvalsh`` (singular values are the
    absolute eigenvalues); others through a full SVD.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(P)):
        raise ValueError("matrix has non-finite entries")
    if P.shape[0] < 2:
        return 0.0
    if np.array_equal(P, P.T):
        sv = np.sort(np.abs(np.linalg.eigvalsh(P)))[::-1]
    else:
        sv = np.linalg.svd(P, compute_uv=False)
    return float(sv[1])


def write_edge_list(g: Graph, path) -> None:
    """Write ``n`` on the first line, then one 1-based ``i j`` pair per line."""
    lines = [str(g.n)] + [f"{i} {j}" for i, j in sorted(g.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> Graph:
    """Parse the edge-list text format and validate connectivity."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or len(rows[0]) != 1:
        raise TopologyError(f"{path}: first line must hold the agent count")
    n = int(rows[0][0])
    edges = []
    for k, r in enumerate(rows[1:], start=2):
        if len(r) != 2:
            raise TopologyError(f"{path}: line {k} is not an 'i j' pair")
        edges.append((int(r[0]), int(r[1])))
    return build_topology("edge_list", n, edges)
