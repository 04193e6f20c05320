"""Immutable simple connected graphs and the BFS-based combinatorics on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numba as nb
import numpy as np

from .errors import GraphParseError, GraphValidationError

MAX_EXACT_DIAMETER = 4096


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple connected graph on vertices ``0..n-1``.

    Adjacency is stored in CSR form (``indptr``, ``indices``) with sorted
    neighbor lists; ``arc_edge[k]`` is the undirected edge id of arc ``k``.
    Edges are kept as an ``(m, 2)`` array with ``u < v`` in lexicographic
    order, which doubles as the edge-id numbering.
    """

    n: int
    edges: np.ndarray
    family_tag: str = ""
    gen_seed: Optional[int] = None
    params: dict = field(default_factory=dict)
    indptr: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)
    arc_edge: np.ndarray = field(init=False, repr=False)
    degrees: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 2:
            raise GraphValidationError(f"need at least 2 vertices, got {n}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise GraphValidationError("edge endpoint out of range")
        loops = np.flatnonzero(edges[:, 0] == edges[:, 1])
        if loops.size:
            raise GraphValidationError(f"self-loop at vertex {edges[loops[0], 0]}")
        edges = np.sort(edges, axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
        if len(edges) > 1:
            dup = np.flatnonzero(np.all(edges[1:] == edges[:-1], axis=1))
            if dup.size:
                u, v = edges[dup[0]]
                raise GraphValidationError(f"duplicate edge {u} {v}")
        m = len(edges)
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        arc_order = np.lexsort((dst, src))
        degrees = np.bincount(src, minlength=n).astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        indices = dst[arc_order].astype(np.int64)
        arc_edge = eid[arc_order].astype(np.int64)
        for arr in (edges, indptr, indices, arc_edge, degrees):
            arr.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "arc_edge", arc_edge)
        object.__setattr__(self, "degrees", degrees)
        comp = _components(indptr, indices, n)
        if comp.max() > 0:
            stray = int(np.flatnonzero(comp == 1)[0])
            raise GraphValidationError(
                f"graph is disconnected: vertex {stray} not reachable from 0 "
                f"({int(comp.max()) + 1} components)")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def delta(self) -> int:
        return int(self.degrees.min())

    @property
    def Delta(self) -> int:
        return int(self.degrees.max())

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @property
    def adjacency(self) -> list:
        return [self.neighbors(v) for v in range(self.n)]

    def has_edge(self, u: int, v: int) -> bool:
        nb_ = self.neighbors(u)
        i = np.searchsorted(nb_, v)
        return bool(i < len(nb_) and nb_[i] == v)

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.edges[:, 0], self.edges[:, 1]] = 1.0
        a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def with_edges(self, extra: Iterable, family_tag: str = None) -> "Graph":
        """New graph with ``extra`` edges added (the original is untouched)."""
        extra = np.asarray(list(extra), dtype=np.int64).reshape(-1, 2)
        return Graph(self.n, np.vstack([self.edges, extra]),
                     family_tag=family_tag or self.family_tag + "+edges")

    @property
    def graph_id(self) -> str:
        if self.params:
            args = ",".join(f"{k}={v}" for k, v in sorted(self.params.items())
                            if k != "weights")
            base = f"{self.family_tag}({args})"
        else:
            base = self.family_tag or f"graph(n={self.n})"
        return base if self.gen_seed is None else f"{base}@{self.gen_seed}"

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self):
        return f"Graph({self.graph_id}, n={self.n}, m={self.m})"


# ---------------------------------------------------------------- edge lists

def from_edge_list(text: str, family_tag: str = "file") -> Graph:
    """Parse the ``"n m"`` header + ``m`` lines of ``"u v"`` format."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GraphParseError("line 1: missing header 'n m'")
    n, m = _parse_pair(lines[0], 1)
    if len(lines) - 1 != m:
        raise GraphParseError(f"header declares {m} edges, found {len(lines) - 1} edge lines")
    edges = np.empty((m, 2), dtype=np.int64)
    seen = {}
    for i, line in enumerate(lines[1:], start=2):
        u, v = _parse_pair(line, i)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphParseError(f"line {i}: vertex out of range 0..{n - 1}: {line!r}")
        if u == v:
            raise GraphValidationError(f"line {i}: self-loop at vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphValidationError(f"line {i}: duplicate edge {u} {v} (first on line {seen[key]})")
        seen[key] = i
        edges[i - 2] = key
    return Graph(n, edges, family_tag=family_tag)


def _parse_pair(line, lineno):
    parts = line.split(" ")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise GraphParseError(f"line {lineno}: expected two non-negative integers, got {line!r}")
    return int(parts[0]), int(parts[1])


def to_edge_list(g: Graph) -> str:
    out = [f"{g.n} {g.m}"]
    out.extend(f"{u} {v}" for u, v in g.edges.tolist())
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- BFS kernels

@nb.njit(cache=True)
def _bfs(indptr, indices, source, dist, queue):
    dist[:] = -1
    dist[source] = 0
    queue[0] = source
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue[tail] = w
                tail += 1
    return tail


@nb.njit(cache=True)
def _components(indptr, indices, n):
    comp = np.full(n, -1, np.int64)
    dist = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    c = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        reached = _bfs(indptr, indices, s, dist, queue)
        for i in range(reached):
            comp[queue[i]] = c
        c += 1
    return comp


@nb.njit(cache=True)
def _eccentricities(indptr, indices, sources):
    n = indptr.shape[0] - 1
    dist = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    ecc = np.empty(sources.shape[0], np.int64)
    for i in range(sources.shape[0]):
        _bfs(indptr, indices, sources[i], dist, queue)
        ecc[i] = dist.max()
    return ecc


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    dist = np.empty(g.n, np.int64)
    _bfs(g.indptr, g.indices, source, dist, np.empty(g.n, np.int64))
    return dist


def distance(g: Graph, u: int, v: int) -> int:
    return int(bfs_distances(g, u)[v])


def all_pairs_distances(g: Graph) -> np.ndarray:
    out = np.empty((g.n, g.n), np.int64)
    queue = np.empty(g.n, np.int64)
    for s in range(g.n):
        _bfs(g.indptr, g.indices, s, out[s], queue)
    return out


@dataclass(frozen=True)
class Diameter:
    value: int
    exact: bool

    def __int__(self):
        return self.value


def diameter(g: Graph, sample: int = 64, seed: int = 0) -> Diameter:
    """Exact by all-sources BFS for ``n <= 4096``; otherwise a sampled lower bound."""
    if g.n <= MAX_EXACT_DIAMETER:
        ecc = _eccentricities(g.indptr, g.indices, np.arange(g.n, dtype=np.int64))
        return Diameter(int(ecc.max()), True)
    rng = np.random.default_rng(seed)
    far = double_sweep(g)[1]
    sources = np.unique(np.concatenate([[far], rng.choice(g.n, size=sample, replace=False)]))
    ecc = _eccentricities(g.indptr, g.indices, sources.astype(np.int64))
    return Diameter(int(ecc.max()), False)


def double_sweep(g: Graph, start: int = 0):
    """Two BFS passes; returns ``(a, b, dist(a, b))`` with ``b`` far from ``a``."""
    a = int(np.argmax(bfs_distances(g, start)))
    da = bfs_distances(g, a)
    b = int(np.argmax(da))
    return a, b, int(da[b])


def is_bipartite(g: Graph) -> bool:
    dist = bfs_distances(g, 0)
    parity = dist % 2
    return bool(np.all(parity[g.edges[:, 0]] != parity[g.edges[:, 1]]))


# ---------------------------------------------------------------- covers and cuts

def two_cover(g: Graph) -> np.ndarray:
    """Greedy distance-2 cover of size at most ``ceil(n / delta)``.

    Repeatedly takes the uncovered vertex of largest degree (lowest index on
    ties) and marks its radius-2 ball as covered. Chosen vertices are pairwise
    at distance >= 3, so their closed neighbourhoods are disjoint and each
    holds at least ``delta + 1`` vertices.
    """
    covered = np.zeros(g.n, dtype=bool)
    order = np.lexsort((np.arange(g.n), -g.degrees))
    chosen = []
    for x in order:
        if covered[x]:
            continue
        chosen.append(int(x))
        covered[x] = True
        for y in g.neighbors(x):
            covered[y] = True
            covered[g.neighbors(y)] = True
    bound = math.ceil(g.n / g.delta)
    if len(chosen) > bound:
        raise AssertionError(f"2-cover of size {len(chosen)} exceeds ceil(n/delta) = {bound}")
    return np.array(sorted(chosen), dtype=np.int64)


def is_two_cover(g: Graph, members) -> bool:
    """Independent check: multi-source BFS from ``members``, radius 2."""
    dist = np.full(g.n, -1)
    frontier = list(members)
    dist[frontier] = 0
    for r in (1, 2):
        nxt = []
        for u in frontier:
            for w in g.neighbors(u):
                if dist[w] < 0:
                    dist[w] = r
                    nxt.append(int(w))
        frontier = nxt
    return bool(np.all(dist >= 0))


@dataclass(frozen=True)
class CutsetFamily:
    endpoints: tuple
    cuts: list  # list of (k, 2) arrays of edges (u < v)

    @property
    def sizes(self) -> list:
        return [len(c) for c in self.cuts]

    def nash_williams(self) -> float:
        return float(sum(1.0 / len(c) for c in self.cuts))


def layered_cutsets(g: Graph, u: int, v: int) -> CutsetFamily:
    """BFS-layer cutsets: the ``i``-th holds the edges from layer ``i-1`` to layer ``i`` around ``u``."""
    if u == v:
        raise ValueError("layered_cutsets needs u != v")
    dist = bfs_distances(g, u)
    du, dv = dist[g.edges[:, 0]], dist[g.edges[:, 1]]
    lo = np.minimum(du, dv)
    crossing = du != dv
    cuts = [g.edges[crossing & (lo == i - 1)] for i in range(1, int(dist[v]) + 1)]
    return CutsetFamily((u, v), cuts)


def separates(g: Graph, cut, u: int, v: int) -> bool:
    """True if removing the edges in ``cut`` disconnects ``u`` from ``v``."""
    removed = {(int(a), int(b)) for a, b in cut}
    seen = {u}
    stack = [u]
    while stack:
        x = stack.pop()
        for y in g.neighbors(x):
            y = int(y)
            if (min(x, y), max(x, y)) in removed or y in seen:
                continue
            if y == v:
                return False
            seen.add(y)
            stack.append(y)
    return True
