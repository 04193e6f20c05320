"""Inequality/ratio engine over one graph, scaling sweeps, and the family comparison table.

Relations come in three kinds:

``exact``   identities and inequalities between exactly computed quantities,
            checked to a numerical tolerance.
``bound``   constant-explicit inequalities involving Monte Carlo estimates,
            passed when ``lhs <= rhs + 3 * stderr_combined``.
``trend``   asymptotic statements with hidden constants; both sides and their
            ratio are recorded and the verdict is always ``trend-only``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.stats import ks_2samp

from . import exact
from ._rng import label_key
from .broadcast import estimate_rba, rba_samples, seq_samples
from .estimate import Estimate, combined_stderr, ratio
from .generators import generate, sized
from .graph import Graph, all_pairs_distances, diameter, double_sweep, is_two_cover, layered_cutsets, two_cover
from .percolation import fpp_samples
from .walk import estimate_blanket_time, estimate_cover_time

SCHEMA_VERSION = 1
SLACK = 3.0
EXACT_REL_TOL = 1e-8
ALL_PAIRS_LIMIT = 100
RATIO_UPPER_CONSTANT = 8.0
DEGREE_BOUND_CONSTANT = 16.0
QUANTILE_SPREAD_CONSTANT = 3.0
FEIGE_LOWER_SLACK = 0.8
FEIGE_UPPER_SLACK = 1.1
SINCLAIR_FACTOR = 4.0
FEIGE_MIN_N = 8  # below this the lower-order terms dominate the n^3 and n ln n leading terms


@dataclass(frozen=True)
class Budget:
    """Trial counts and caps per estimator family."""

    walk_trials: int = 1000
    broadcast_trials: int = 10_000
    fpp_trials: int = 10_000
    step_cap: int = 10 ** 9
    round_cap: int = 10 ** 6
    pair_sources: int = 2
    exact_pair_sample: int = 64

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v <= 0:
                raise ValueError(f"budget {k} must be positive")


@dataclass(frozen=True)
class RelationReport:
    relation_tag: str
    graph_id: str
    lhs: float
    rhs: float
    margin: float
    stderr_combined: float
    verdict: str
    notes: str = ""
    kind: str = "bound"
    tolerance: float = 0.0
    trials: int = 0
    pair: Optional[tuple] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pair"] = list(self.pair) if self.pair is not None else None
        return d


CSV_COLUMNS = ("relation_tag", "graph_id", "kind", "lhs", "rhs", "margin", "stderr_combined",
               "tolerance", "trials", "verdict", "pair", "notes")


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        d = r.to_dict()
        d["pair"] = "" if r.pair is None else f"{r.pair[0]}-{r.pair[1]}"
        w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _fmt(x):
    return repr(x) if isinstance(x, float) else x


# ---------------------------------------------------------------- per-graph cache

class Lab:
    """Lazily computed exact quantities and estimates for one graph, shared across relations."""

    def __init__(self, g: Graph, budget: Budget = None, seed: int = 0):
        self.g = g
        self.budget = budget or Budget()
        self.seed = int(seed)

    def key(self, label):
        return label_key(self.seed, label)

    @cached_property
    def kernel(self):
        return exact.transition_kernel(self.g)

    @cached_property
    def spectral(self):
        return exact.spectral(self.kernel)

    @cached_property
    def dist(self):
        return all_pairs_distances(self.g)

    @cached_property
    def diameter(self):
        return diameter(self.g).value

    @cached_property
    def pairs(self) -> np.ndarray:
        n = self.g.n
        if n <= ALL_PAIRS_LIMIT:
            iu, ju = np.triu_indices(n, 1)
            return np.column_stack([iu, ju])
        rng = np.random.Generator(np.random.Philox(self.key("pairs")))
        out = set()
        while len(out) < self.budget.exact_pair_sample:
            u, v = (int(x) for x in rng.choice(n, 2, replace=False))
            out.add((min(u, v), max(u, v)))
        return np.array(sorted(out))

    @cached_property
    def commute(self) -> np.ndarray:
        """Commute times on ``pairs`` from hitting-time solves."""
        if self.g.n <= ALL_PAIRS_LIMIT:
            c = exact.commute_time_matrix(self.kernel)
            return c[self.pairs[:, 0], self.pairs[:, 1]]
        cache = {}

        def h(target):
            if target not in cache:
                cache[target] = exact.hitting_times_to(self.kernel, target)
            return cache[target]
        return np.array([h(v)[u] + h(u)[v] for u, v in self.pairs])

    @cached_property
    def resistance_matrix(self):
        return exact.resistance_matrix(self.g)

    @cached_property
    def resistance(self) -> np.ndarray:
        return self.resistance_matrix[self.pairs[:, 0], self.pairs[:, 1]]

    @cached_property
    def max_commute(self) -> float:
        return 2 * self.g.m * float(self.resistance_matrix.max())

    @cached_property
    def cover(self) -> Estimate:
        return estimate_cover_time(self.g, self.budget.walk_trials, self.key("cover"),
                                   cap=self.budget.step_cap)

    @cached_property
    def blanket(self) -> Estimate:
        return estimate_blanket_time(self.g, self.budget.walk_trials, self.key("blanket"),
                                     cap=self.budget.step_cap)

    @cached_property
    def rba(self) -> Estimate:
        return estimate_rba(self.g, self.budget.broadcast_trials, self.key("rba"),
                            cap=self.budget.round_cap)

    @cached_property
    def quotient(self) -> Estimate:
        return ratio(self.cover, self.rba, "quotient")

    @cached_property
    def sources(self) -> list:
        a = int(np.argmin(self.g.degrees))
        b = double_sweep(self.g)[1]
        return list(dict.fromkeys([a, b]))[: self.budget.pair_sources]

    def _per_source(self, label, fn):
        cache = self.__dict__.setdefault("_src_cache", {})
        if label not in cache:
            cache[label] = {s: fn(s) for s in self.sources}
        return cache[label]

    @property
    def ufpp(self):
        t = self.budget.fpp_trials
        return self._per_source("ufpp", lambda s: fpp_samples(self.g, s, t, self.key("ufpp"), False))

    @property
    def dfpp(self):
        t = self.budget.fpp_trials
        return self._per_source("dfpp", lambda s: fpp_samples(self.g, s, t, self.key("dfpp"), True))

    @property
    def seq(self):
        t = self.budget.fpp_trials
        return self._per_source("seq", lambda s: seq_samples(self.g, s, t, self.key("seq"))[0])

    @property
    def rba_times(self):
        t = self.budget.broadcast_trials

        def run(s):
            _, _, times = rba_samples(self.g, [s], t, self.key("rba-pairs"), self.budget.round_cap,
                                      keep_times=True)
            return times[0].astype(float)
        return self._per_source("rba_times", run)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return x.mean(axis=0), x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])


# ---------------------------------------------------------------- relation catalog

@dataclass(frozen=True)
class Relation:
    tag: str
    kind: str
    statement: str
    evaluate: Callable


CATALOG: dict = {}


def _relation(tag, kind, statement):
    def register(fn):
        CATALOG[tag] = Relation(tag, kind, statement, fn)
        return fn
    return register


def _report(lab, tag, lhs, rhs, se=0.0, tol=0.0, notes="", trials=0, pair=None, verdict=None):
    kind = CATALOG[tag].kind
    lhs, rhs, se = float(lhs), float(rhs), float(se)
    if kind == "trend":
        verdict = "trend-only"
        margin = lhs / rhs if rhs else math.inf
    else:
        margin = rhs - lhs
        if verdict is None:
            verdict = "pass" if lhs <= rhs + SLACK * se + tol else "fail"
    return RelationReport(tag, lab.g.graph_id, lhs, rhs, float(margin), se, verdict, notes,
                          kind, float(tol), int(trials), pair)


def _worst(lab, tag, lhs, rhs, se, pairs, tol=None, notes="", trials=0):
    """Report the pair with the least slack; pass only if every pair passes."""
    lhs, rhs = np.asarray(lhs, float), np.asarray(rhs, float)
    se = np.broadcast_to(np.asarray(se, float), lhs.shape)
    tol = np.zeros_like(lhs) if tol is None else np.broadcast_to(np.asarray(tol, float), lhs.shape)
    slack = rhs + SLACK * se + tol - lhs
    scale = np.maximum(SLACK * se + tol, 1e-300)
    # least normalised slack; near-ties go to the pair with the largest rhs
    key = np.round(np.where(scale > 1e-300, slack / scale, slack), 6)
    i = int(np.lexsort((-rhs, key))[0])
    ok = bool(np.all(slack >= 0))
    note = f"{len(lhs)} pairs checked; worst shown" + (f"; {notes}" if notes else "")
    return _report(lab, tag, lhs[i], rhs[i], se[i], tol[i], note, trials,
                   tuple(int(x) for x in pairs[i]), "pass" if ok else "fail")


@_relation("commute-resistance", "exact", "C(u,v) = 2|E| R(u,v) for every pair")
def _commute_resistance(lab: Lab):
    c = lab.commute
    rhs = 2 * lab.g.m * lab.resistance
    tol = EXACT_REL_TOL * c
    bad = np.abs(c - rhs) > tol
    rep = _worst(lab, "commute-resistance", np.abs(c - rhs), tol, 0.0, lab.pairs)
    # largest relative gap; among ties the pair with the largest commute time
    rel = np.abs(c - rhs) / c
    i = int(np.lexsort((c, np.where(rel < 1e-12, 0.0, rel)))[-1])
    return replace(rep, lhs=float(c[i]), rhs=float(rhs[i]), margin=float(rhs[i] - c[i]),
                   tolerance=float(tol[i]), pair=tuple(int(x) for x in lab.pairs[i]),
                   verdict="fail" if bad.any() else "pass",
                   notes=f"{len(c)} pairs; largest relative gap {np.max(np.abs(c - rhs) / c):.2e} shown")


@_relation("commute-distance", "exact", "C(u,v) >= 2 dist(u,v)^2")
def _commute_distance(lab: Lab):
    p = lab.pairs
    lhs = 2.0 * lab.dist[p[:, 0], p[:, 1]] ** 2
    return _worst(lab, "commute-distance", lhs, lab.commute, 0.0, p, tol=EXACT_REL_TOL * lab.commute)


@_relation("nash-williams", "exact", "2|E| sum_i 1/|Pi_i| <= C(u,v) for BFS-layer cutsets")
def _nash_williams(lab: Lab):
    p = lab.pairs
    lhs = np.array([2.0 * lab.g.m * layered_cutsets(lab.g, int(u), int(v)).nash_williams() for u, v in p])
    return _worst(lab, "nash-williams", lhs, lab.commute, 0.0, p, tol=EXACT_REL_TOL * lab.commute)


@_relation("two-cover", "exact", "greedy distance-2 cover has |X| <= ceil(n/delta)")
def _two_cover(lab: Lab):
    g = lab.g
    x = two_cover(g)
    bound = math.ceil(g.n / g.delta)
    valid = is_two_cover(g, x)
    return _report(lab, "two-cover", len(x), bound, notes=f"cover property {'holds' if valid else 'FAILS'}",
                   verdict="pass" if valid and len(x) <= bound else "fail")


@_relation("sinclair-mixing", "exact",
           "MIX_eps <= 4/(1-lambda2) (ln n + ln 1/eps); lower direction recorded only")
def _sinclair(lab: Lab):
    from .graph import is_bipartite
    k = exact.transition_kernel(lab.g, lazy=is_bipartite(lab.g))
    mix = exact.mixing_time(k)
    b = exact.sinclair_bounds(k)
    if mix.steps is None:
        return _report(lab, "sinclair-mixing", math.inf, b["upper"], notes="mixing cap reached",
                       verdict="fail")
    lower_ratio = mix.steps / b["lower"] if b["lower"] > 0 else math.inf
    return _report(lab, "sinclair-mixing", mix.steps, b["upper"],
                   notes=f"{'lazy' if k.lazy else 'plain'} kernel; mix/lower-bound ratio {lower_ratio:.3g}")


@_relation("feige-cover", "bound", "0.8 n ln n <= COV(G) <= 1.1 (4/27) n^3")
def _feige(lab: Lab):
    n = lab.g.n
    cov = lab.cover
    lo, hi = FEIGE_LOWER_SLACK * n * math.log(n), FEIGE_UPPER_SLACK * 4 / 27 * n ** 3
    lower_ok = lo <= cov.mean + SLACK * cov.stderr
    upper_ok = cov.mean <= hi + SLACK * cov.stderr
    notes = f"lower side {lo:.6g} <= {cov.mean:.6g} ({'ok' if lower_ok else 'FAIL'}); " \
            f"upper side {cov.mean:.6g} <= {hi:.6g} ({'ok' if upper_ok else 'FAIL'}); {cov.label}"
    # report the side with the smaller relative margin
    if (cov.mean - lo) / lo < (hi - cov.mean) / hi:
        lhs, rhs = lo, cov.mean
    else:
        lhs, rhs = cov.mean, hi
    verdict = "pass" if lower_ok and upper_ok else "fail"
    if n < FEIGE_MIN_N:
        verdict, notes = "trend-only", f"n < {FEIGE_MIN_N}: leading terms only; " + notes
    return _report(lab, "feige-cover", lhs, rhs, cov.stderr, notes=notes, trials=cov.trials,
                   verdict=verdict)


@_relation("cover-commute", "bound", "max C / 2 <= COV(G) <= e^3 max C ln n + n")
def _cover_commute(lab: Lab):
    n = lab.g.n
    cov, mc = lab.cover, lab.max_commute
    lo, hi = 0.5 * mc, math.e ** 3 * mc * math.log(n) + n
    lower_ok = lo <= cov.mean + SLACK * cov.stderr
    upper_ok = cov.mean <= hi + SLACK * cov.stderr
    notes = f"max commute {mc:.6g}; lower {'ok' if lower_ok else 'FAIL'}, upper {'ok' if upper_ok else 'FAIL'}; {cov.label}"
    return _report(lab, "cover-commute", lo, cov.mean, cov.stderr, notes=notes, trials=cov.trials,
                   verdict="pass" if lower_ok and upper_ok else "fail")


@_relation("spectral-cover-trend", "trend", "COV(G) = O(n log n / (1-lambda2)) on regular graphs")
def _spectral_cover(lab: Lab):
    rhs = lab.g.n * math.log(lab.g.n) / lab.spectral.gap
    note = "" if lab.g.delta == lab.g.Delta else "graph not regular"
    return _report(lab, "spectral-cover-trend", lab.cover.mean, rhs, lab.cover.stderr, notes=note,
                   trials=lab.cover.trials)


@_relation("spectral-push-trend", "trend", "COV(G) = O(n log^3 n / (1-lambda2)) on regular graphs")
def _spectral_push(lab: Lab):
    n = lab.g.n
    rhs = n * math.log(n) ** 3 / lab.spectral.gap
    return _report(lab, "spectral-push-trend", lab.cover.mean, rhs, lab.cover.stderr,
                   trials=lab.cover.trials)


@_relation("push-lower", "bound", "every run needs >= max(ceil(log2 n), ecc(s)) rounds; E[RBA(G)] >= max(log2 n, diam)")
def _push_lower(lab: Lab):
    g = lab.g
    s = lab.sources[0]
    c, _, _ = rba_samples(g, [s], lab.budget.broadcast_trials, lab.key("push-lower"), lab.budget.round_cap)
    per_run = max(math.ceil(math.log2(g.n)), int(lab.dist[s].max()))
    run_ok = bool(c.min() >= per_run)
    lhs = max(math.log2(g.n), lab.diameter)
    notes = f"min completion from {s}: {int(c.min())} vs {per_run} ({'ok' if run_ok else 'FAIL'})"
    rep = _report(lab, "push-lower", lhs, lab.rba.mean, lab.rba.stderr, notes=notes,
                  trials=lab.rba.trials)
    return rep if run_ok else replace(rep, verdict="fail")


@_relation("push-quantile", "bound", "E[RBA(G)] <= RBA_{1/n}(G) <= 3 ln n E[RBA(G)]")
def _push_quantile(lab: Lab):
    est = lab.rba
    if est.quantile is None:
        raise ValueError(f"insufficient budget: push-quantile needs broadcast_trials >= {10 * lab.g.n}")
    hi = QUANTILE_SPREAD_CONSTANT * math.log(lab.g.n) * est.mean
    lower_ok = est.mean <= est.quantile + SLACK * est.stderr
    upper_ok = est.quantile <= hi + SLACK * QUANTILE_SPREAD_CONSTANT * math.log(lab.g.n) * est.stderr
    return _report(lab, "push-quantile", est.quantile, hi,
                   QUANTILE_SPREAD_CONSTANT * math.log(lab.g.n) * est.stderr,
                   notes=f"mean {est.mean:.6g} <= quantile ({'ok' if lower_ok else 'FAIL'})",
                   trials=est.trials, verdict="pass" if lower_ok and upper_ok else "fail")


@_relation("push-degree-bound", "bound", "RBA_{1/n}(G) <= 16 Delta (ln n + diam)")
def _push_degree(lab: Lab):
    est = lab.rba
    if est.quantile is None:
        raise ValueError(f"insufficient budget: push-degree-bound needs broadcast_trials >= {10 * lab.g.n}")
    rhs = DEGREE_BOUND_CONSTANT * lab.g.Delta * (math.log(lab.g.n) + lab.diameter)
    return _report(lab, "push-degree-bound", est.quantile, rhs, trials=est.trials,
                   notes="quantile is an order statistic; no stderr slack")


def _pairwise(lab: Lab, fn):
    """Evaluate ``fn(s, targets) -> (lhs, rhs, se)`` per source and stack with pair labels."""
    lhs, rhs, se, pairs = [], [], [], []
    for s in lab.sources:
        targets = np.array([v for v in range(lab.g.n) if v != s])
        a, b, e = fn(s, targets)
        lhs.append(a)
        rhs.append(b)
        se.append(np.broadcast_to(e, a.shape))
        pairs.append(np.column_stack([np.full(len(targets), s), targets]))
    return np.concatenate(lhs), np.concatenate(rhs), np.concatenate(se), np.concatenate(pairs)


@_relation("resistance-percolation", "bound", "R(s,v) <= E[UFPP(s,v)]")
def _resistance_percolation(lab: Lab):
    def fn(s, t):
        m, e = _mean_se(lab.ufpp[s][:, t])
        return lab.resistance_matrix[s, t], m, e
    return _worst(lab, "resistance-percolation", *_pairwise(lab, fn), trials=lab.budget.fpp_trials)


@_relation("directed-percolation", "bound", "E[UFPP(s,v)] <= 2 E[DFPP(s,v)]")
def _directed(lab: Lab):
    def fn(s, t):
        mu, eu = _mean_se(lab.ufpp[s][:, t])
        md, ed = _mean_se(lab.dfpp[s][:, t])
        return mu, 2 * md, np.hypot(eu, 2 * ed)
    return _worst(lab, "directed-percolation", *_pairwise(lab, fn), trials=lab.budget.fpp_trials)


def ks_threshold(n1: int, n2: int, tests: int = 1) -> float:
    """Two-sample KS critical value at family-wise level 1% over ``tests`` comparisons
    (Bonferroni), rounded up to 3 decimals, plus 0.001."""
    c = math.sqrt(-math.log(0.01 / tests / 2) / 2)
    crit = round(c, 3) * math.sqrt((n1 + n2) / (n1 * n2))
    return math.ceil(crit * 1000) / 1000 + 0.001


@_relation("seq-dfpp-law", "bound", "SEQ(s,v) and DFPP(s,v) have the same law (two-sample KS)")
def _seq_dfpp(lab: Lab):
    thr = ks_threshold(lab.budget.fpp_trials, lab.budget.fpp_trials,
                       len(lab.sources) * (lab.g.n - 1))

    def fn(s, t):
        d = np.array([ks_2samp(lab.seq[s][:, v], lab.dfpp[s][:, v]).statistic for v in t])
        return d, np.full(len(t), thr), 0.0
    return _worst(lab, "seq-dfpp-law", *_pairwise(lab, fn), trials=lab.budget.fpp_trials,
                  notes="lhs is the KS distance")


@_relation("seq-push", "bound", "E[SEQ(s,v)] <= E[RBA(s,v)] / delta")
def _seq_push(lab: Lab):
    d = lab.g.delta

    def fn(s, t):
        ms, es = _mean_se(lab.seq[s][:, t])
        mr, er = _mean_se(lab.rba_times[s][:, t])
        return ms, mr / d, np.hypot(es, er / d)
    return _worst(lab, "seq-push", *_pairwise(lab, fn), trials=lab.budget.fpp_trials)


@_relation("percolation-push", "bound", "E[UFPP(s,v)] <= (2/delta) E[RBA(s,v)]")
def _percolation_push(lab: Lab):
    d = lab.g.delta

    def fn(s, t):
        mu, eu = _mean_se(lab.ufpp[s][:, t])
        mr, er = _mean_se(lab.rba_times[s][:, t])
        return mu, 2 * mr / d, np.hypot(eu, 2 * er / d)
    return _worst(lab, "percolation-push", *_pairwise(lab, fn), trials=lab.budget.fpp_trials)


@_relation("commute-push", "bound", "C(s,v) <= 4 (|E|/delta) E[RBA(s,v)]")
def _commute_push(lab: Lab):
    g = lab.g
    f = 4.0 * g.m / g.delta

    def fn(s, t):
        mr, er = _mean_se(lab.rba_times[s][:, t])
        return 2 * g.m * lab.resistance_matrix[s, t], f * mr, f * er
    return _worst(lab, "commute-push", *_pairwise(lab, fn), trials=lab.budget.broadcast_trials,
                  notes="C(s,v) = 2|E| R(s,v) from the Laplacian solve")


@_relation("ratio-upper", "bound", "R(G) = COV/E[RBA] <= 8 (|E|/delta) ln n")
def _ratio_upper(lab: Lab):
    g = lab.g
    q = lab.quotient
    rhs = RATIO_UPPER_CONSTANT * g.m / g.delta * math.log(g.n)
    return _report(lab, "ratio-upper", q.mean, rhs, q.stderr, trials=q.trials)


@_relation("blanket-cover", "bound", "BLA(G) >= COV(G)")
def _blanket_cover(lab: Lab):
    cov, bla = lab.cover, lab.blanket
    return _report(lab, "blanket-cover", cov.mean, bla.mean, combined_stderr(cov.stderr, bla.stderr),
                   trials=cov.trials)


@_relation("blanket-cover-trend", "trend", "BLA(G) = O(COV(G) (log log n)^2)")
def _blanket_trend(lab: Lab):
    n = lab.g.n
    ll = math.log(max(math.log(n), math.e))
    return _report(lab, "blanket-cover-trend", lab.blanket.mean, lab.cover.mean * ll ** 2,
                   lab.blanket.stderr, trials=lab.blanket.trials)


@_relation("sparse-ratio-lower", "trend", "R(G) = Omega(sqrt(n log n) / Delta)")
def _sparse_ratio(lab: Lab):
    n = lab.g.n
    rhs = math.sqrt(n) / lab.g.Delta * math.sqrt(math.log(n))
    return _report(lab, "sparse-ratio-lower", lab.quotient.mean, rhs, lab.quotient.stderr)


@_relation("degree-ratio-lower", "trend", "R(G) = Omega(sqrt(n/delta) / log n) when Delta = O(delta)")
def _degree_ratio(lab: Lab):
    n = lab.g.n
    rhs = math.sqrt(n / lab.g.delta) / math.log(n)
    return _report(lab, "degree-ratio-lower", lab.quotient.mean, rhs, lab.quotient.stderr,
                   notes=f"Delta/delta = {lab.g.Delta / lab.g.delta:.3g}")


@_relation("dense-ratio-lower", "trend", "R(G) = Omega(delta^2 / (n log n)) when Delta = O(delta)")
def _dense_ratio(lab: Lab):
    n = lab.g.n
    rhs = lab.g.delta ** 2 / (n * math.log(n))
    return _report(lab, "dense-ratio-lower", lab.quotient.mean, rhs, lab.quotient.stderr,
                   notes=f"Delta/delta = {lab.g.Delta / lab.g.delta:.3g}")


@_relation("cover-diameter", "trend", "COV(G)/diam = Omega(max(sqrt n, delta) sqrt(log n))")
def _cover_diameter(lab: Lab):
    n = lab.g.n
    rhs = max(math.sqrt(n), lab.g.delta) * math.sqrt(math.log(n))
    return _report(lab, "cover-diameter", lab.cover.mean / lab.diameter, rhs,
                   lab.cover.stderr / lab.diameter)


@_relation("harary-torus-ratio", "trend", "R(G) = O(max(sqrt n, d) log^2 n) on the Harary-torus family")
def _harary_torus(lab: Lab):
    n = lab.g.n
    rhs = max(math.sqrt(n), lab.g.delta) * math.log(n) ** 2
    note = "" if lab.g.family_tag == "harary_torus" else f"family is {lab.g.family_tag}"
    return _report(lab, "harary-torus-ratio", lab.quotient.mean, rhs, lab.quotient.stderr, notes=note)


def catalog() -> list:
    return sorted(CATALOG)


def check_relation(tag: str, g: Graph, budget: Budget = None, seed: int = 0,
                   lab: Lab = None) -> RelationReport:
    """Evaluate one catalogued relation on ``g``; pass a ``lab`` to share estimates across calls."""
    if tag not in CATALOG:
        raise KeyError(f"unknown relation tag {tag!r}; known: {', '.join(catalog())}")
    lab = lab or Lab(g, budget, seed)
    return CATALOG[tag].evaluate(lab)


def check_all(g: Graph, tags=None, budget: Budget = None, seed: int = 0) -> list:
    lab = Lab(g, budget, seed)
    return [check_relation(t, g, lab=lab) for t in (tags or catalog())]


def quotient_R(g: Graph, budget: Budget = None, seed: int = 0) -> Estimate:
    """COV(G) / E[RBA(G)] with a delta-method stderr."""
    budget = budget or Budget()
    if budget.walk_trials < 100 or budget.broadcast_trials < 100:
        raise ValueError("quotient_R needs at least 100 trials for each estimator")
    return Lab(g, budget, seed).quotient


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class ScalingFit:
    family: str
    metric: str
    sizes: list
    values: list
    stderrs: list
    trials: list
    exponent: float
    r_squared: float
    polylog_power: float = 0.0
    corrected_exponent: Optional[float] = None
    complete: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


METRICS = ("cov", "rba", "gap-inverse", "ratio")


def loglog_fit(sizes, values) -> tuple:
    """Least-squares slope of log(value) on log(n) and its R^2."""
    x, y = np.log(np.asarray(sizes, float)), np.log(np.asarray(values, float))
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), min(max(r2, 0.0), 1.0)


def measure(g: Graph, metric: str, budget: Budget, seed: int) -> Estimate:
    if metric == "cov":
        return estimate_cover_time(g, budget.walk_trials, label_key(seed, "cover"), cap=budget.step_cap)
    if metric == "rba":
        return estimate_rba(g, budget.broadcast_trials, label_key(seed, "rba"), cap=budget.round_cap)
    if metric == "gap-inverse":
        gap = exact.spectral(exact.transition_kernel(g)).gap
        return Estimate(1.0 / gap, 0.0, 1, seed, "gap-inverse", notes="exact")
    if metric == "ratio":
        return quotient_R(g, budget, seed)
    raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")


def scaling_sweep(family: str, sizes, metric: str, budget: Budget = None, seed: int = 0,
                  polylog_power: float = 0.0) -> ScalingFit:
    """Fit the log-log exponent of ``metric`` over graphs of ``family`` at ``sizes``.

    With ``polylog_power = k`` the values are also divided by ``(ln n)^k`` and
    refitted, e.g. k=2 for torus cover time.
    """
    sizes = [int(n) for n in sizes]
    if len(sizes) < 4 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("need at least 4 strictly increasing sizes")
    budget = budget or Budget()
    graphs = [sized(family, n, seed) for n in sizes]
    ns = [g.n for g in graphs]
    ests = [measure(g, metric, budget, label_key(seed, f"sweep/{family}/{metric}/{g.n}")) for g in graphs]
    values = [e.mean for e in ests]
    slope, r2 = loglog_fit(ns, values)
    corrected = None
    if polylog_power:
        corrected = loglog_fit(ns, [v / math.log(n) ** polylog_power for n, v in zip(ns, values)])[0]
    return ScalingFit(family, metric, ns, values, [e.stderr for e in ests], [e.trials for e in ests],
                      slope, r2, polylog_power, corrected, all(e.complete for e in ests))


def fits_to_csv(fits) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "metric", "n", "value", "stderr", "trials", "exponent",
                "corrected_exponent", "r_squared"])
    for f in fits:
        for n, v, s, t in zip(f.sizes, f.values, f.stderrs, f.trials):
            w.writerow([f.family, f.metric, n, repr(v), repr(s), t, repr(f.exponent),
                        "" if f.corrected_exponent is None else repr(f.corrected_exponent),
                        repr(f.r_squared)])
    return buf.getvalue()


# ---------------------------------------------------------------- family comparison table

# orders as tabulated for each family: (cover, broadcast, 1/(1-lambda2))
FIGURE2_ROWS = (
    ("path/cycle", "cycle", "n^2", "n", "n^2"),
    ("complete O(1)-ary tree", "kary_tree", "n log^2 n", "log n", "n"),
    ("complete graph", "complete", "n log n", "log n", "1"),
    ("random-regular (expander whp)", "random_regular", "n log n", "log n", "1"),
    ("hypercube", "hypercube", "n log n", "log n", "log n"),
    ("sqrt(n) x sqrt(n) torus", "torus2d", "n log^2 n", "sqrt(n)", "n"),
    ("K_{n/2} x K_2", "prism", "n log n", "log n", "n"),
    ("lollipop", "lollipop", "n^3", "n", "n^2"),
)

FIGURE2_NOTE = ("Equivalence of polylog-optimal cover time (vs max(n log n, diam^2)) and "
                "broadcast time (vs max(diam, log n)) fails in both directions; the "
                "counter-example graphs are not specified, so no row represents them.")


@dataclass(frozen=True)
class Figure2Row:
    label: str
    family: str
    graph_id: str
    n: int
    cov: Estimate
    rba: Estimate
    gap_inverse: float
    expected_cov: str
    expected_rba: str
    expected_gap_inverse: str

    def to_dict(self):
        return {"label": self.label, "family": self.family, "graph_id": self.graph_id, "n": self.n,
                "cov": self.cov.to_dict(), "rba": self.rba.to_dict(), "gap_inverse": self.gap_inverse,
                "expected": {"cov": self.expected_cov, "rba": self.expected_rba,
                             "gap_inverse": self.expected_gap_inverse}}


@dataclass(frozen=True)
class Figure2Report:
    size: int
    rows: list
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "size": self.size,
                "rows": [r.to_dict() for r in self.rows], "notes": list(self.notes)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "family", "n", "cov", "cov_stderr", "cov_trials", "rba", "rba_stderr",
                    "rba_trials", "rba_quantile", "gap_inverse", "expected_cov", "expected_rba",
                    "expected_gap_inverse"])
        for r in self.rows:
            w.writerow([r.label, r.family, r.n, repr(r.cov.mean), repr(r.cov.stderr), r.cov.trials,
                        repr(r.rba.mean), repr(r.rba.stderr), r.rba.trials,
                        "" if r.rba.quantile is None else repr(r.rba.quantile),
                        repr(r.gap_inverse), r.expected_cov, r.expected_rba, r.expected_gap_inverse])
        return buf.getvalue()


def figure2_table(budget: Budget = None, seed: int = 0, size: int = 64) -> Figure2Report:
    """Cover time, broadcast time and relaxation time for each tabulated family at ``size``."""
    budget = budget or Budget()
    rows = []
    for label, fam, ec, er, eg in FIGURE2_ROWS:
        g = sized(fam, size, seed)
        lab = Lab(g, budget, label_key(seed, f"figure2/{fam}"))
        rows.append(Figure2Row(label, fam, g.graph_id, g.n, lab.cover, lab.rba,
                               1.0 / lab.spectral.gap, ec, er, eg))
    notes = [FIGURE2_NOTE]
    prism = next(r for r in rows if r.family == "prism")
    notes.append(f"prism: cover {prism.cov.mean:.4g} and broadcast {prism.rba.mean:.4g} near the "
                 f"complete graph's, but 1/(1-lambda2) = {prism.gap_inverse:.4g} grows linearly in n")
    return Figure2Report(size, rows, notes)


# ---------------------------------------------------------------- ratio landscape

@dataclass(frozen=True)
class LandscapePoint:
    d: int
    n: int
    delta: int
    Delta: int
    m: int
    quotient: Estimate

    def curves(self) -> dict:
        ln = math.log(self.n)
        return {"dense_lower": self.delta ** 2 / (self.n * ln),
                "upper": self.m / self.delta * ln,
                "construction": max(math.sqrt(self.n), self.delta) * ln ** 2}


def ratio_landscape(n: int, degrees, budget: Budget = None, seed: int = 0) -> list:
    """Measured R(G) on ``harary_torus(d, n)`` for each degree ``d``."""
    budget = budget or Budget()
    out = []
    for d in degrees:
        g = generate("harary_torus", {"d": int(d), "n": int(n)})
        q = quotient_R(g, budget, label_key(seed, f"landscape/{d}"))
        out.append(LandscapePoint(int(d), g.n, g.delta, g.Delta, g.m, q))
    return out
