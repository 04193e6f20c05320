"""First-passage percolation with i.i.d. Exp(1) weights, undirected and directed."""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from ._rng import derive, label_key, new_state, uniform_open
from .estimate import Estimate
from .graph import Graph


@dataclass(frozen=True)
class PercolationSample:
    source: int
    directed: bool
    passage_time: np.ndarray
    weights: np.ndarray  # per edge id (undirected) or per CSR arc (directed)
    weight_seed: int

    def arc_weights(self, g: Graph) -> np.ndarray:
        return self.weights if self.directed else self.weights[g.arc_edge]


@nb.njit(cache=True)
def _draw_weights(state, count, out):
    for i in range(count):
        out[i] = -np.log(uniform_open(state))


@nb.njit(cache=True)
def _dijkstra(indptr, indices, arc_w, s, dist):
    """Single-source passage times; heap keyed by (dist, vertex) so ties go to the lower index."""
    n = indptr.shape[0] - 1
    dist[:] = np.inf
    dist[s] = 0.0
    cap = indices.shape[0] + 1
    hd = np.empty(cap, np.float64)
    hv = np.empty(cap, np.int64)
    done = np.zeros(n, np.bool_)
    size = 1
    hd[0] = 0.0
    hv[0] = s
    while size > 0:
        d, u = hd[0], hv[0]
        size -= 1
        hd[0], hv[0] = hd[size], hv[size]
        i = 0
        while True:
            c = 2 * i + 1
            if c >= size:
                break
            if c + 1 < size and (hd[c + 1] < hd[c] or (hd[c + 1] == hd[c] and hv[c + 1] < hv[c])):
                c += 1
            if hd[c] < hd[i] or (hd[c] == hd[i] and hv[c] < hv[i]):
                hd[i], hd[c] = hd[c], hd[i]
                hv[i], hv[c] = hv[c], hv[i]
                i = c
            else:
                break
        if done[u]:
            continue
        done[u] = True
        for k in range(indptr[u], indptr[u + 1]):
            w = indices[k]
            nd = d + arc_w[k]
            if nd < dist[w]:
                dist[w] = nd
                j = size
                hd[j], hv[j] = nd, w
                size += 1
                while j > 0:
                    p = (j - 1) // 2
                    if hd[j] < hd[p] or (hd[j] == hd[p] and hv[j] < hv[p]):
                        hd[j], hd[p] = hd[p], hd[j]
                        hv[j], hv[p] = hv[p], hv[j]
                        j = p
                    else:
                        break


@nb.njit(cache=True)
def _fpp_one(indptr, indices, arc_edge, m, s, directed, state, weights, arc_w, dist):
    if directed:
        _draw_weights(state, indices.shape[0], weights)
        for k in range(indices.shape[0]):
            arc_w[k] = weights[k]
    else:
        _draw_weights(state, m, weights)
        for k in range(indices.shape[0]):
            arc_w[k] = weights[arc_edge[k]]
    _dijkstra(indptr, indices, arc_w, s, dist)


@nb.njit(parallel=True, cache=True)
def _fpp_batch(indptr, indices, arc_edge, m, s, directed, key, trials):
    n = indptr.shape[0] - 1
    arcs = indices.shape[0]
    out = np.empty((trials, n), np.float64)
    for i in nb.prange(trials):
        state = np.empty(1, np.uint64)
        state[0] = derive(key, i)
        weights = np.empty(arcs if directed else m, np.float64)
        arc_w = np.empty(arcs, np.float64)
        dist = np.empty(n, np.float64)
        _fpp_one(indptr, indices, arc_edge, m, s, directed, state, weights, arc_w, dist)
        for v in range(n):
            out[i, v] = dist[v]
    return out


def _sample(g: Graph, s: int, seed: int, directed: bool) -> PercolationSample:
    weights = np.empty(2 * g.m if directed else g.m)
    arc_w = np.empty(2 * g.m)
    dist = np.empty(g.n)
    _fpp_one(g.indptr, g.indices, g.arc_edge, g.m, int(s), directed, new_state(seed),
             weights, arc_w, dist)
    return PercolationSample(int(s), directed, dist, weights, int(seed))


def sample_ufpp(g: Graph, s: int, seed: int) -> PercolationSample:
    """One Exp(1) weight per undirected edge; passage time = lightest path weight."""
    return _sample(g, s, seed, False)


def sample_dfpp(g: Graph, s: int, seed: int) -> PercolationSample:
    """Independent Exp(1) weights on both orientations of every edge."""
    return _sample(g, s, seed, True)


def fpp_samples(g: Graph, s: int, trials: int, seed: int, directed: bool) -> np.ndarray:
    """``(trials, n)`` passage times from ``s``; fresh weights every trial."""
    tag = "dfpp" if directed else "ufpp"
    key = np.uint64(label_key(seed, f"{tag}/{int(s)}"))
    return _fpp_batch(g.indptr, g.indices, g.arc_edge, g.m, int(s), bool(directed), key, int(trials))


def estimate_fpp(g: Graph, s: int, v: int, directed: bool, trials: int, seed: int) -> Estimate:
    if trials < 2:
        raise ValueError("need at least 2 trials")
    x = fpp_samples(g, s, trials, seed, directed)[:, v]
    tag = "dfpp" if directed else "ufpp"
    return Estimate.from_samples(x, seed, f"{tag}[{s},{v}]", start=int(s))


def relaxation_violation(g: Graph, sample: PercolationSample) -> float:
    """Largest ``T(w) - T(u) - w(u->w)`` over arcs; <= 0 up to rounding for a valid sample."""
    src = np.repeat(np.arange(g.n), np.diff(g.indptr))
    t = sample.passage_time
    return float(np.max(t[g.indices] - t[src] - sample.arc_weights(g)))
