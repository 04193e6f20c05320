"""Randomized push broadcast: synchronous rounds (RBA) and exponential clocks (SEQ)."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numba as nb
import numpy as np

from ._rng import derive, exponential, label_key, new_state, randbelow
from .estimate import Estimate, empirical_quantile, resolve_starts, worst_of
from .graph import Graph

DEFAULT_ROUND_CAP = 10 ** 6
DEFAULT_EVENT_CAP = 10 ** 8


@dataclass(frozen=True)
class BroadcastOutcome:
    source: int
    informed_time: np.ndarray  # int rounds for RBA, float time for SEQ; -1 / inf if never
    completion_time: float
    complete: bool
    model: str

    def to_json(self) -> str:
        t = self.informed_time
        if self.model == "rba":
            vals, cnt = np.unique(t, return_counts=True)
            hist = {str(int(v)): int(c) for v, c in zip(vals, cnt)}
        else:
            counts, edges = np.histogram(t[np.isfinite(t)], bins=min(32, len(t)))
            hist = {"bin_edges": edges.tolist(), "counts": counts.tolist()}
        return json.dumps({"source": self.source, "model": self.model,
                           "completion": self.completion_time, "complete": self.complete,
                           "histogram": hist})


# ---------------------------------------------------------------- RBA

@nb.njit(cache=True)
def _rba(indptr, indices, s, cap, state, informed, order, sizes):
    """Synchronous push from ``s``. Fills ``informed`` (round of first receipt, -1 = never).

    A vertex informed in round t first pushes in round t+1. ``sizes[t]`` is
    |I_t| for t up to the returned round count. Returns ``(rounds, complete)``.
    """
    n = indptr.shape[0] - 1
    informed[:] = -1
    informed[s] = 0
    order[0] = s
    k = 1
    sizes[0] = 1
    t = 0
    while k < n:
        if t >= cap:
            return t, False
        t += 1
        active = k
        for i in range(active):
            u = order[i]
            d = indptr[u + 1] - indptr[u]
            w = indices[indptr[u] + randbelow(state, d)]
            if informed[w] < 0:
                informed[w] = t
                order[k] = w
                k += 1
        if t < sizes.shape[0]:
            sizes[t] = k
    return t, True


@nb.njit(parallel=True, cache=True)
def _rba_batch(indptr, indices, starts, keys, trials, cap, keep_times):
    n = indptr.shape[0] - 1
    ns = starts.shape[0]
    completion = np.empty((ns, trials), np.int64)
    done = np.ones((ns, trials), np.bool_)
    times = np.empty((ns * trials if keep_times else 0, n), np.int32)
    for job in nb.prange(ns * trials):
        j = job // trials
        i = job % trials
        state = np.empty(1, np.uint64)
        state[0] = derive(keys[j], i)
        informed = np.empty(n, np.int64)
        order = np.empty(n, np.int64)
        sizes = np.empty(1, np.int64)
        r, ok = _rba(indptr, indices, starts[j], cap, state, informed, order, sizes)
        completion[j, i] = r
        done[j, i] = ok
        if keep_times:
            for v in range(n):
                times[job, v] = informed[v]
    return completion, done, times


def run_rba(g: Graph, s: int, seed: int, cap: int = DEFAULT_ROUND_CAP,
            return_sizes: bool = False):
    """One synchronous push broadcast from ``s``."""
    informed = np.empty(g.n, np.int64)
    order = np.empty(g.n, np.int64)
    sizes = np.zeros(g.n + 1 if not return_sizes else min(cap, 64 * g.n * g.n) + 1, np.int64)
    rounds, ok = _rba(g.indptr, g.indices, int(s), int(cap), new_state(seed), informed, order, sizes)
    out = BroadcastOutcome(int(s), informed, float(rounds), bool(ok), "rba")
    if return_sizes:
        return out, sizes[:rounds + 1].copy()
    return out


def _keys(seed, tag, starts):
    return np.array([label_key(seed, f"{tag}/{int(s)}") for s in starts], dtype=np.uint64)


def rba_samples(g: Graph, starts, trials: int, seed: int, cap: int = DEFAULT_ROUND_CAP,
                keep_times: bool = False):
    """Completion rounds ``(starts, trials)``, flags, and optionally per-vertex informed rounds."""
    starts = np.asarray(starts, dtype=np.int64)
    c, done, times = _rba_batch(g.indptr, g.indices, starts, _keys(seed, "rba", starts),
                                int(trials), int(cap), keep_times)
    if keep_times:
        times = times.reshape(len(starts), trials, g.n)
    return c, done, times


def estimate_rba(g: Graph, trials: int, seed: int, start_policy="worst", p: float = None,
                 cap: int = DEFAULT_ROUND_CAP) -> Estimate:
    """E[RBA(G)] (max per-start mean) and RBA_p(G) (max per-start 1-p quantile).

    An explicit ``p`` requires ``trials >= 10/p``. With the default ``p = 1/n``
    the quantile is left out (and noted) when there are too few trials.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    explicit = p is not None
    p = p if explicit else 1.0 / g.n
    if not explicit and trials < 10 / p:
        p = None
    starts, exhaustive = resolve_starts(g, start_policy, seed)
    c, done, _ = rba_samples(g, starts, trials, seed, cap)
    est = worst_of(c, starts, exhaustive, seed, "rba", complete=bool(done.all()), p=p)
    if p is None:
        est = replace(est, notes=f"quantile 1/n skipped: {trials} trials < 10n")
    return est


def pairwise_rba(g: Graph, s: int, v: int, trials: int, seed: int, p: float = None,
                 cap: int = DEFAULT_ROUND_CAP) -> Estimate:
    """E[RBA(s, v)] with its 1-p empirical quantile (if ``p`` given)."""
    if s == v:
        raise ValueError("pairwise_rba needs s != v")
    if trials < 2:
        raise ValueError("need at least 2 trials")
    _, done, times = rba_samples(g, [s], trials, seed, cap, keep_times=True)
    x = times[0, :, v]
    q = empirical_quantile(x, p) if p is not None else None
    return Estimate.from_samples(x, seed, f"rba[{s},{v}]", complete=bool(done.all()),
                                 start=int(s), quantile=q, quantile_p=p)


# ---------------------------------------------------------------- SEQ

@nb.njit(inline="always", cache=True)
def _less(ta, qa, tb, qb):
    return ta < tb or (ta == tb and qa < qb)


@nb.njit(cache=True)
def _heap_push(ht, hq, hv, size, t, q, v):
    i = size
    ht[i], hq[i], hv[i] = t, q, v
    while i > 0:
        p = (i - 1) // 2
        if _less(ht[i], hq[i], ht[p], hq[p]):
            ht[i], ht[p] = ht[p], ht[i]
            hq[i], hq[p] = hq[p], hq[i]
            hv[i], hv[p] = hv[p], hv[i]
            i = p
        else:
            break
    return size + 1


@nb.njit(cache=True)
def _heap_pop(ht, hq, hv, size):
    t, v = ht[0], hv[0]
    size -= 1
    ht[0], hq[0], hv[0] = ht[size], hq[size], hv[size]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and _less(ht[c + 1], hq[c + 1], ht[c], hq[c]):
            c += 1
        if _less(ht[c], hq[c], ht[i], hq[i]):
            ht[i], ht[c] = ht[c], ht[i]
            hq[i], hq[c] = hq[c], hq[i]
            hv[i], hv[c] = hv[c], hv[i]
            i = c
        else:
            break
    return t, v, size


@nb.njit(cache=True)
def _seq(indptr, indices, s, cap, state, informed):
    """Continuous-time push: an informed vertex u pushes to a uniform neighbour at
    the jumps of a rate-deg(u) Poisson clock. Returns ``(completion, complete)``.

    Each informed vertex has at most one pending event, so the heap holds <= n.
    A vertex whose neighbours are all informed stops scheduling pushes.
    """
    n = indptr.shape[0] - 1
    informed[:] = np.inf
    informed[s] = 0.0
    pending = np.empty(n, np.int64)  # uninformed neighbours
    for u in range(n):
        pending[u] = indptr[u + 1] - indptr[u]
    for k in range(indptr[s], indptr[s + 1]):
        pending[indices[k]] -= 1
    ht = np.empty(n, np.float64)
    hq = np.empty(n, np.int64)
    hv = np.empty(n, np.int64)
    size = 0
    seq = 0
    count = 1
    if count == n:
        return 0.0, True
    size = _heap_push(ht, hq, hv, size, exponential(state, indptr[s + 1] - indptr[s]), seq, s)
    seq += 1
    events = 0
    while size > 0:
        if events >= cap:
            return np.inf, False
        events += 1
        t, u, size = _heap_pop(ht, hq, hv, size)
        d = indptr[u + 1] - indptr[u]
        w = indices[indptr[u] + randbelow(state, d)]
        if informed[w] == np.inf:
            informed[w] = t
            count += 1
            if count == n:
                return t, True
            for k in range(indptr[w], indptr[w + 1]):
                pending[indices[k]] -= 1
            if pending[w] > 0:
                size = _heap_push(ht, hq, hv, size,
                                  t + exponential(state, indptr[w + 1] - indptr[w]), seq, w)
                seq += 1
        if pending[u] > 0:
            size = _heap_push(ht, hq, hv, size, t + exponential(state, d), seq, u)
            seq += 1
    return np.inf, False


@nb.njit(parallel=True, cache=True)
def _seq_batch(indptr, indices, s, key, trials, cap):
    n = indptr.shape[0] - 1
    times = np.empty((trials, n), np.float64)
    done = np.ones(trials, np.bool_)
    for i in nb.prange(trials):
        state = np.empty(1, np.uint64)
        state[0] = derive(key, i)
        informed = np.empty(n, np.float64)
        _, ok = _seq(indptr, indices, s, cap, state, informed)
        done[i] = ok
        for v in range(n):
            times[i, v] = informed[v]
    return times, done


def run_seq(g: Graph, s: int, seed: int, cap: int = DEFAULT_EVENT_CAP) -> BroadcastOutcome:
    informed = np.empty(g.n)
    t, ok = _seq(g.indptr, g.indices, int(s), int(cap), new_state(seed), informed)
    return BroadcastOutcome(int(s), informed, float(t), bool(ok), "seq")


def seq_samples(g: Graph, s: int, trials: int, seed: int, cap: int = DEFAULT_EVENT_CAP):
    """``(trials, n)`` first-receipt times under SEQ from ``s``, plus completion flags."""
    return _seq_batch(g.indptr, g.indices, int(s), np.uint64(label_key(seed, f"seq/{int(s)}")),
                      int(trials), int(cap))
