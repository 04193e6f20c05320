"""Monte Carlo estimates and the worst-case start policy shared by the estimators."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ._rng import label_key
from .errors import InsufficientTrialsError
from .graph import Graph, double_sweep

EXHAUSTIVE_START_LIMIT = 64
SAMPLED_STARTS = 16


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    trials: int
    seed: int
    metric_tag: str
    ci95: tuple = field(default=None)
    complete: bool = True
    start: Optional[int] = None
    starts_scanned: int = 1
    exhaustive: bool = True
    quantile: Optional[float] = None
    quantile_p: Optional[float] = None
    notes: str = ""

    def __post_init__(self):
        if self.stderr < 0 or not self.trials >= 1:
            raise ValueError("stderr must be >= 0 and trials >= 1")
        if self.ci95 is None:
            half = 1.96 * self.stderr
            object.__setattr__(self, "ci95", (self.mean - half, self.mean + half))

    @classmethod
    def from_samples(cls, samples, seed, metric_tag, complete=True, **kw) -> "Estimate":
        x = np.asarray(samples, dtype=float)
        se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        return cls(float(x.mean()), se, len(x), int(seed), metric_tag, complete=complete, **kw)

    @property
    def label(self) -> str:
        return "exhaustive" if self.exhaustive else "sampled-start lower bound"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci95"] = list(self.ci95)
        d["start_label"] = self.label
        return d


def empirical_quantile(samples, p: float) -> float:
    """Smallest sample value whose empirical CDF reaches ``1 - p``."""
    x = np.sort(np.asarray(samples))
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if len(x) < 10 / p:
        raise InsufficientTrialsError(
            f"insufficient trials for quantile p={p:g}: have {len(x)}, need >= {math.ceil(10 / p)}")
    k = math.ceil((1 - p) * len(x) - 1e-9)
    return float(x[max(k, 1) - 1])


def scan_starts(g: Graph, seed: int) -> tuple:
    """Start vertices to scan for a worst-case maximum, and whether the scan is exhaustive.

    All vertices when ``n <= 64``. Otherwise a fixed sample of 16: a
    minimum-degree vertex, the far end of a double BFS sweep, and seeded
    random vertices.
    """
    if g.n <= EXHAUSTIVE_START_LIMIT:
        return np.arange(g.n, dtype=np.int64), True
    picks = [int(np.argmin(g.degrees)), double_sweep(g)[1]]
    rng = np.random.Generator(np.random.Philox(label_key(seed, "starts")))
    for v in rng.permutation(g.n):
        if len(picks) == SAMPLED_STARTS:
            break
        if int(v) not in picks:
            picks.append(int(v))
    return np.array(picks, dtype=np.int64), False


def resolve_starts(g: Graph, start_policy, seed: int) -> tuple:
    if start_policy in (None, "worst", "worst-case-scan"):
        return scan_starts(g, seed)
    s = int(start_policy)
    if not 0 <= s < g.n:
        raise ValueError(f"start vertex {s} out of range")
    return np.array([s], dtype=np.int64), True


def worst_of(samples: np.ndarray, starts: np.ndarray, exhaustive: bool, seed: int,
             metric_tag: str, complete: bool = True, p: float = None) -> Estimate:
    """Reduce a ``(starts, trials)`` sample matrix to the worst start's estimate.

    The mean is the largest per-start mean; the quantile (if requested) is the
    largest per-start empirical ``1-p`` quantile, possibly at another start.
    """
    means = samples.mean(axis=1)
    j = int(np.argmax(means))
    q = None
    if p is not None:
        q = max(empirical_quantile(row, p) for row in samples)
    est = Estimate.from_samples(samples[j], seed, metric_tag, complete=complete,
                                start=int(starts[j]), starts_scanned=len(starts),
                                exhaustive=exhaustive, quantile=q, quantile_p=p)
    return est


def ratio(num: Estimate, den: Estimate, metric_tag: str) -> Estimate:
    """Ratio of two independent estimates; stderr by the delta method."""
    r = num.mean / den.mean
    se = abs(r) * math.hypot(num.stderr / num.mean if num.mean else 0.0,
                             den.stderr / den.mean if den.mean else 0.0)
    return Estimate(r, se, min(num.trials, den.trials), num.seed, metric_tag,
                    complete=num.complete and den.complete,
                    exhaustive=num.exhaustive and den.exhaustive)


def combined_stderr(*errors) -> float:
    return math.sqrt(sum(e * e for e in errors))
