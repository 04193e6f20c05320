"""Monte Carlo random walks: trajectories, cover, hitting and blanket times."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np

from ._rng import derive, label_key, new_state, randbelow
from .estimate import Estimate, resolve_starts, worst_of
from .graph import Graph

DEFAULT_STEP_CAP = 10 ** 9

STEPS, COVERED, HIT, BLANKET = 0, 1, 2, 3
_KINDS = {"steps": STEPS, "covered": COVERED, "hit": HIT, "blanket": BLANKET}


@dataclass(frozen=True)
class StopCondition:
    """When a walk stops: after ``steps(T)``, once ``covered()``, on ``hit(v)`` or at ``blanket()``."""

    kind: str
    arg: int = 0
    factor: float = 2.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown stop condition {self.kind!r}")
        if self.kind == "blanket" and not self.factor > 1:
            raise ValueError("blanket factor must exceed 1")

    @classmethod
    def steps(cls, t: int) -> "StopCondition":
        return cls("steps", int(t))

    @classmethod
    def covered(cls) -> "StopCondition":
        return cls("covered")

    @classmethod
    def hit(cls, v: int) -> "StopCondition":
        return cls("hit", int(v))

    @classmethod
    def blanket(cls, factor: float = 2.0) -> "StopCondition":
        return cls("blanket", 0, float(factor))


@dataclass(frozen=True)
class WalkStats:
    start: int
    steps_taken: int
    visit_counts: np.ndarray
    cover_step: Optional[int]
    complete: bool
    stop: StopCondition


@nb.njit(cache=True)
def _walk(indptr, indices, s, kind, arg, factor, cap, state, counts, tree):
    """Run one walk from ``s``; returns ``(stop_step, cover_step, complete)``.

    ``counts`` receives visit counts W_t(s, .) including X_0. ``tree`` is
    scratch for the blanket stop (a min-tree over each vertex's latest
    admissible time ``factor * 2m * W(u) / deg(u)``).
    """
    n = indptr.shape[0] - 1
    counts[:] = 0
    counts[s] = 1
    two_m = np.float64(indptr[n])
    unseen = n - 1
    cover = 0 if unseen == 0 else -1
    u = s
    if kind == STEPS and arg == 0:
        return 0, cover, True
    if kind == COVERED and unseen == 0:
        return 0, 0, True

    size = 1
    max_lo = 0.0
    if kind == BLANKET:
        while size < n:
            size *= 2
        for i in range(2 * size):
            tree[i] = np.inf
        for v in range(n):
            tree[size + v] = 0.0
        deg_s = np.float64(indptr[s + 1] - indptr[s])
        max_lo = two_m / (factor * deg_s)
        tree[size + s] = factor * two_m / deg_s
        for i in range(size - 1, 0, -1):
            tree[i] = min(tree[2 * i], tree[2 * i + 1])

    t = 0
    while t < cap:
        d = indptr[u + 1] - indptr[u]
        u = indices[indptr[u] + randbelow(state, d)]
        t += 1
        counts[u] += 1
        if counts[u] == 1:
            unseen -= 1
            if unseen == 0:
                cover = t
        if kind == STEPS:
            if t >= arg:
                return t, cover, True
        elif kind == COVERED:
            if unseen == 0:
                return t, cover, True
        elif kind == HIT:
            if u == arg:
                return t, cover, True
        else:
            w = np.float64(counts[u])
            du = np.float64(indptr[u + 1] - indptr[u])
            lo = w * two_m / (factor * du)
            if lo > max_lo:
                max_lo = lo
            i = size + u
            tree[i] = factor * w * two_m / du
            i //= 2
            while i >= 1:
                tree[i] = min(tree[2 * i], tree[2 * i + 1])
                i //= 2
            if max_lo <= t and t <= tree[1]:
                return t, cover, True
    return t, cover, False


@nb.njit(parallel=True, cache=True)
def _walk_batch(indptr, indices, starts, keys, trials, kind, arg, factor, cap):
    """Stop steps for ``trials`` walks from each start; trial i of start j uses derive(keys[j], i)."""
    n = indptr.shape[0] - 1
    ns = starts.shape[0]
    out = np.empty((ns, trials), np.int64)
    done = np.ones((ns, trials), np.bool_)
    size = 1
    while size < n:
        size *= 2
    for job in nb.prange(ns * trials):
        j = job // trials
        i = job % trials
        state = np.empty(1, np.uint64)
        state[0] = derive(keys[j], i)
        counts = np.empty(n, np.int64)
        tree = np.empty(2 * size if kind == BLANKET else 1, np.float64)
        steps, _, ok = _walk(indptr, indices, starts[j], kind, arg, factor, cap, state, counts, tree)
        out[j, i] = steps
        done[j, i] = ok
    return out, done


def _tree_buf(g, kind):
    size = 1
    while size < g.n:
        size *= 2
    return np.empty(2 * size if kind == BLANKET else 1)


def simulate_walk(g: Graph, s: int, stop: StopCondition, seed: int,
                  cap: int = DEFAULT_STEP_CAP) -> WalkStats:
    """One walk from ``s``; deterministic in ``(g, s, stop, seed)``."""
    kind = _KINDS[stop.kind]
    if kind == HIT and not 0 <= stop.arg < g.n:
        raise ValueError("hit target out of range")
    counts = np.empty(g.n, np.int64)
    steps, cover, ok = _walk(g.indptr, g.indices, int(s), kind, stop.arg, stop.factor,
                             int(cap), new_state(seed), counts, _tree_buf(g, kind))
    return WalkStats(int(s), int(steps), counts, None if cover < 0 else int(cover), bool(ok), stop)


def walk_samples(g: Graph, starts, stop: StopCondition, trials: int, seed: int,
                 cap: int = DEFAULT_STEP_CAP):
    """``(starts, trials)`` matrix of stop steps plus completion flags."""
    starts = np.asarray(starts, dtype=np.int64)
    keys = np.array([label_key(seed, f"walk/{stop.kind}/{stop.arg}/{int(s)}") for s in starts],
                    dtype=np.uint64)
    return _walk_batch(g.indptr, g.indices, starts, keys, int(trials), _KINDS[stop.kind],
                       int(stop.arg), float(stop.factor), int(cap))


def _check_trials(trials):
    if trials < 2:
        raise ValueError("need at least 2 trials")


def estimate_cover_time(g: Graph, trials: int, seed: int, start_policy="worst",
                        cap: int = DEFAULT_STEP_CAP) -> Estimate:
    """COV(G): worst per-start mean cover time over the scanned starts."""
    _check_trials(trials)
    starts, exhaustive = resolve_starts(g, start_policy, seed)
    x, done = walk_samples(g, starts, StopCondition.covered(), trials, seed, cap)
    return worst_of(x, starts, exhaustive, seed, "cover", complete=bool(done.all()))


def estimate_blanket_time(g: Graph, trials: int, seed: int, start_policy="worst",
                          factor: float = 2.0, cap: int = DEFAULT_STEP_CAP) -> Estimate:
    """BLA(G): first t with ``t pi(u) / factor <= W_t(s, u) <= factor t pi(u)`` for all u."""
    _check_trials(trials)
    starts, exhaustive = resolve_starts(g, start_policy, seed)
    x, done = walk_samples(g, starts, StopCondition.blanket(factor), trials, seed, cap)
    return worst_of(x, starts, exhaustive, seed, "blanket", complete=bool(done.all()))


def estimate_hitting_time(g: Graph, u: int, v: int, trials: int, seed: int,
                          cap: int = DEFAULT_STEP_CAP) -> Estimate:
    _check_trials(trials)
    x, done = walk_samples(g, [u], StopCondition.hit(v), trials, seed, cap)
    return Estimate.from_samples(x[0], seed, "hitting", complete=bool(done.all()), start=int(u))
