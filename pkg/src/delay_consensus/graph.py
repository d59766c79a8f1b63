"""Directed communication graphs with one delay channel per edge.

Agents are labelled 1..N.  An edge ``Edge(source=j, target=i)`` means agent
i receives agent j's state, i.e. j is a neighbour of i and the adjacency
entry a_ij is the edge weight.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidGraph
from .linalg import eigvals, rank


class Edge(NamedTuple):
    source: int
    target: int
    weight: float = 1.0


@dataclass(frozen=True)
class DelayGraph:
    N: int
    edges: tuple
    tau_bar: Optional[tuple] = None
    mu: Optional[tuple] = None
    # delay index (1-based) of each entry in ``edges``; None until index_delays runs
    k: Optional[tuple] = None

    def __post_init__(self):
        edges = tuple(Edge(int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.N < 2:
            raise InvalidGraph(f"need at least 2 agents, got N={self.N}")
        seen = set()
        for e in edges:
            if not (1 <= e.source <= self.N and 1 <= e.target <= self.N):
                raise InvalidGraph(f"edge {e.source}->{e.target} references an unknown agent")
            if e.source == e.target:
                raise InvalidGraph(f"self-loop at agent {e.source}")
            if (e.source, e.target) in seen:
                raise InvalidGraph(f"duplicate edge {e.source}->{e.target}")
            if not (e.weight > 0 and np.isfinite(e.weight)):
                raise InvalidGraph(f"edge {e.source}->{e.target} needs a positive weight")
            seen.add((e.source, e.target))
        r = len(edges)
        for name in ("tau_bar", "mu"):
            vals = getattr(self, name)
            if vals is None:
                continue
            vals = tuple(float(v) for v in vals)
            object.__setattr__(self, name, vals)
            if len(vals) != r:
                raise InvalidGraph(f"{name} has {len(vals)} entries for {r} edges")
        if self.tau_bar is not None and any(not (t > 0) for t in self.tau_bar):
            raise InvalidGraph("tau_bar entries must be positive")
        if self.mu is not None and any(not (0 <= m < 1) for m in self.mu):
            raise InvalidGraph("mu entries must lie in [0, 1)")
        if self.k is not None:
            object.__setattr__(self, "k", tuple(int(v) for v in self.k))
            if sorted(self.k) != list(range(1, r + 1)):
                raise InvalidGraph("delay indices must be a bijection onto 1..r")

    @property
    def r(self) -> int:
        return len(self.edges)

    @property
    def indexed(self) -> bool:
        return self.k is not None

    def neighbors(self, i: int) -> list:
        """Sorted neighbour set of agent ``i`` (agents it listens to)."""
        return sorted(e.source for e in self.edges if e.target == i)

    def edges_by_k(self) -> list:
        """Edges ordered by delay index; requires :func:`index_delays`."""
        if self.k is None:
            raise InvalidGraph("delays are not indexed; call index_delays first")
        out = [None] * self.r
        for e, kk in zip(self.edges, self.k):
            out[kk - 1] = e
        return out

    def with_bounds(self, tau_bar=None, mu=None) -> "DelayGraph":
        return replace(
            self,
            tau_bar=self.tau_bar if tau_bar is None else tuple(tau_bar),
            mu=self.mu if mu is None else tuple(mu),
        )


@dataclass(frozen=True)
class TopologyReport:
    strongly_connected: bool
    has_spanning_tree: bool
    laplacian_eigenvalues: np.ndarray
    roots: tuple = field(default=())
    scc_count: int = 0


def laplacian(g: DelayGraph) -> np.ndarray:
    L = np.zeros((g.N, g.N))
    for e in g.edges:
        i, j = e.target - 1, e.source - 1
        L[i, j] -= e.weight
        L[i, i] += e.weight
    return L


def index_delays(g: DelayGraph) -> DelayGraph:
    """Assign k by sweeping receivers i = 1..N and, inside, neighbours j ascending."""
    position = {(e.source, e.target): p for p, e in enumerate(g.edges)}
    k = [0] * g.r
    count = 0
    for i in range(1, g.N + 1):
        for j in g.neighbors(i):
            count += 1
            k[position[(j, i)]] = count
    return replace(g, k=tuple(k))


def edge_laplacian(N: int, e: Edge) -> np.ndarray:
    Lk = np.zeros((N, N))
    i, j = e.target - 1, e.source - 1
    Lk[i, i] = e.weight
    Lk[i, j] = -e.weight
    return Lk


def split_laplacians(g: DelayGraph) -> list:
    """Single-edge Laplacians L_1..L_r in delay-index order; they sum to L."""
    return [edge_laplacian(g.N, e) for e in g.edges_by_k()]


def _reachable(adj: list, start: int) -> set:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def strongly_connected_components(N: int, adj: list) -> list:
    """Tarjan's algorithm on nodes 0..N-1 (iterative to avoid recursion limits)."""
    index = [-1] * N
    low = [0] * N
    on_stack = [False] * N
    stack: list = []
    comps: list = []
    counter = 0
    for root in range(N):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recursed = False
            for p in range(pos, len(adj[v])):
                w = adj[v][p]
                if index[w] == -1:
                    work.append((v, p + 1))
                    work.append((w, 0))
                    recursed = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recursed:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return comps


def check_topology(g: DelayGraph, warn: bool = True) -> TopologyReport:
    # information flows source -> target
    adj = [[] for _ in range(g.N)]
    for e in g.edges:
        adj[e.source - 1].append(e.target - 1)
    for a in adj:
        a.sort()
    comps = strongly_connected_components(g.N, adj)
    roots = tuple(v + 1 for v in range(g.N) if len(_reachable(adj, v)) == g.N)
    report = TopologyReport(
        strongly_connected=len(comps) == 1,
        has_spanning_tree=bool(roots),
        laplacian_eigenvalues=np.sort_complex(eigvals(laplacian(g))),
        roots=roots,
        scc_count=len(comps),
    )
    if warn and report.has_spanning_tree and not report.strongly_connected:
        warnings.warn(
            "graph has a directed spanning tree but is not strongly connected; "
            "continuing with the analysis",
            stacklevel=2,
        )
    return report


def zero_eigenvalue_is_simple(g: DelayGraph, tol: float = 1e-9) -> bool:
    return rank(laplacian(g), tol) == g.N - 1


def random_digraph(rng: np.random.Generator, N: int, p: float = 0.4,
                   spanning_tree: bool = True, weights: Sequence[float] = (1.0,)) -> DelayGraph:
    """Random simple digraph; with ``spanning_tree`` a random rooted tree is embedded first."""
    pairs = set()
    if spanning_tree:
        order = rng.permutation(N) + 1
        for pos in range(1, N):
            parent = order[rng.integers(0, pos)]
            pairs.add((int(parent), int(order[pos])))
    for j in range(1, N + 1):
        for i in range(1, N + 1):
            if i != j and rng.random() < p:
                pairs.add((j, i))
    edges = [Edge(j, i, float(rng.choice(weights))) for j, i in sorted(pairs)]
    return DelayGraph(N=N, edges=tuple(edges))
