"""Exact walk quantities by dense linear algebra (n <= 2048)."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import NumericalError, SizeError
from .graph import Graph, diameter, is_bipartite, layered_cutsets

MAX_DENSE_N = 2048
DEFAULT_EPS = math.exp(-1)


def _check_size(g: Graph):
    if g.n > MAX_DENSE_N:
        raise SizeError(f"dense exact computation supports n <= {MAX_DENSE_N}, got n={g.n}")


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    graph: Graph
    lazy: bool
    matrix: np.ndarray
    pi: np.ndarray


def transition_kernel(g: Graph, lazy: bool = False) -> TransitionKernel:
    _check_size(g)
    p = g.adjacency_matrix() / g.degrees[:, None]
    if lazy:
        p = 0.5 * np.eye(g.n) + 0.5 * p
    pi = g.degrees / (2.0 * g.m)
    if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
        raise NumericalError("kernel rows do not sum to 1")
    if np.max(np.abs(pi @ p - pi)) > 1e-10:
        raise NumericalError("degree distribution is not stationary for the kernel")
    p.flags.writeable = False
    pi.flags.writeable = False
    return TransitionKernel(g, lazy, p, pi)


def stationary(k: TransitionKernel) -> np.ndarray:
    return k.pi.copy()


def return_time(k: TransitionKernel, v: int) -> float:
    """Expected first return time ``H(v, v) = 1 / pi(v)``."""
    return 1.0 / k.pi[v]


def hitting_times_to(k: TransitionKernel, v: int) -> np.ndarray:
    """Expected steps to reach ``v`` from every vertex (entry ``v`` is 0).

    Solves ``h(u) = 1 + sum_w P(u, w) h(w)`` on ``u != v`` by LU with
    partial pivoting and checks the residual.
    """
    n = k.graph.n
    keep = np.arange(n) != v
    a = np.eye(n - 1) - k.matrix[np.ix_(keep, keep)]
    b = np.ones(n - 1)
    try:
        h = scipy.linalg.lu_solve(scipy.linalg.lu_factor(a, check_finite=False), b)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"hitting-time system singular: {exc}") from exc
    resid = np.max(np.abs(a @ h - b))
    if not resid < 1e-8 * n:
        raise NumericalError(f"hitting-time residual {resid:.3g} too large")
    out = np.zeros(n)
    out[keep] = h
    return out


def hitting_time_matrix(k: TransitionKernel) -> np.ndarray:
    """``H[u, v]`` for all pairs, diagonal 0 (one solve per target)."""
    return np.column_stack([hitting_times_to(k, v) for v in range(k.graph.n)])


def commute_time(k: TransitionKernel, u: int, v: int) -> float:
    if u == v:
        raise ValueError("commute_time needs u != v")
    return float(hitting_times_to(k, v)[u] + hitting_times_to(k, u)[v])


def commute_time_matrix(k: TransitionKernel) -> np.ndarray:
    h = hitting_time_matrix(k)
    return h + h.T


def laplacian(g: Graph) -> np.ndarray:
    return np.diag(g.degrees.astype(float)) - g.adjacency_matrix()


def effective_resistance(g: Graph, u: int, v: int) -> float:
    """Voltage drop for a unit current u -> v, grounding ``v``."""
    if u == v:
        raise ValueError("effective_resistance needs u != v")
    _check_size(g)
    keep = np.arange(g.n) != v
    rhs = np.zeros(g.n)
    rhs[u] = 1.0
    phi = np.zeros(g.n)
    phi[keep] = scipy.linalg.solve(laplacian(g)[np.ix_(keep, keep)], rhs[keep], assume_a="pos")
    return float(phi[u] - phi[v])


def resistance_matrix(g: Graph) -> np.ndarray:
    """All-pairs effective resistance from one grounded Laplacian inverse."""
    _check_size(g)
    lg = laplacian(g)[1:, 1:]
    inv = np.zeros((g.n, g.n))
    inv[1:, 1:] = scipy.linalg.inv(lg)
    d = np.diag(inv)
    r = d[:, None] + d[None, :] - 2 * inv
    np.fill_diagonal(r, 0.0)
    return r


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray  # descending
    gap: float
    periodic: bool

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def relaxation_time(self) -> float:
        return 1.0 / self.gap


def spectral(k: TransitionKernel) -> SpectralData:
    """Spectrum of ``D^{1/2} P D^{-1/2}`` (symmetric, similar to P)."""
    sq = np.sqrt(k.graph.degrees.astype(float))
    s = k.matrix * sq[:, None] / sq[None, :]
    s = 0.5 * (s + s.T)
    try:
        ev = scipy.linalg.eigvalsh(s)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    ev = ev[::-1].copy()
    if abs(ev[0] - 1.0) > 1e-9:
        raise NumericalError(f"top eigenvalue {ev[0]!r} is not 1")
    periodic = (not k.lazy) and is_bipartite(k.graph)
    return SpectralData(ev, float(1.0 - ev[1]), periodic)


@dataclass(frozen=True)
class MixingResult:
    steps: Optional[int]
    eps: float
    periodic: bool = False
    capped: bool = False
    cap: Optional[int] = None

    def __int__(self):
        if self.steps is None:
            raise ValueError("no finite mixing time (periodic kernel or cap hit)")
        return self.steps


def _worst_l1(m, pi):
    return float(np.max(np.abs(m - pi).sum(axis=1)))


def mixing_time(k: TransitionKernel, eps: float = DEFAULT_EPS) -> MixingResult:
    """``max_s min{t : ||p_s(t) - pi||_1 <= eps}`` over all starts.

    The worst-start distance is non-increasing in ``t``, so the first
    crossing is found by repeated squaring of P followed by a binary descent
    over the stored powers: O(n^3 log t) instead of t matrix-vector sweeps.
    """
    if not 0 < eps < 2:
        raise ValueError("eps must lie in (0, 2)")
    n = k.graph.n
    if not k.lazy and is_bipartite(k.graph):
        return MixingResult(None, eps, periodic=True)
    cap = 64 * n * n
    pi = k.pi
    if _worst_l1(np.eye(n), pi) <= eps:
        return MixingResult(0, eps)
    powers = [np.array(k.matrix)]
    while _worst_l1(powers[-1], pi) > eps:
        if 1 << (len(powers) - 1) >= cap:
            return MixingResult(None, eps, capped=True, cap=cap)
        powers.append(powers[-1] @ powers[-1])
    # largest t with distance > eps, built from binary digits
    t, cur = 0, None
    for j in range(len(powers) - 2, -1, -1):
        cand = powers[j] if cur is None else cur @ powers[j]
        if _worst_l1(cand, pi) > eps:
            t += 1 << j
            cur = cand
    steps = t + 1
    if steps > cap:
        return MixingResult(None, eps, capped=True, cap=cap)
    return MixingResult(steps, eps)


def distribution_after(k: TransitionKernel, s: int, t: int) -> np.ndarray:
    """``p_s(t)`` by t plain vector-matrix products (reference route)."""
    p = np.zeros(k.graph.n)
    p[s] = 1.0
    for _ in range(t):
        p = p @ k.matrix
    return p


def sinclair_bounds(k: TransitionKernel, eps: float = DEFAULT_EPS) -> dict:
    """Lower/upper spectral bounds on the mixing time with constants 1/2 and 4."""
    sp = spectral(k)
    lam = sp.lambda2
    n = k.graph.n
    lower = 0.5 * lam / (1 - lam) * math.log(1 / eps) if lam > 0 else 0.0
    upper = 4.0 / (1 - lam) * (math.log(n) + math.log(1 / eps))
    return {"lambda2": lam, "lower": lower, "upper": upper}


@dataclass(frozen=True)
class Bound:
    bound_name: str
    theorem_tag: str
    value: float


class BoundTable(list):
    def get(self, name) -> float:
        for b in self:
            if b.bound_name == name:
                return b.value
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps([{"bound_name": b.bound_name, "theorem_tag": b.theorem_tag,
                            "value": b.value} for b in self], indent=2)


def bound_calculators(g: Graph, k: TransitionKernel = None, pairs=()) -> BoundTable:
    """Named numeric bounds for ``g``; ``pairs`` adds Nash-Williams resistance bounds."""
    k = k or transition_kernel(g)
    n = g.n
    ln = math.log(n)
    gap = spectral(k).gap
    max_c = 2 * g.m * float(resistance_matrix(g).max())
    diam = diameter(g).value
    table = BoundTable([
        Bound("n_ln_n", "feige-cover", n * ln),
        Bound("four_27_n_cubed", "feige-cover", 4.0 / 27.0 * n ** 3),
        Bound("spectral_cover", "spectral-cover-trend", n * ln / gap),
        Bound("two_dist_squared", "commute-distance", 2.0 * diam ** 2),
        Bound("half_max_commute", "cover-commute", 0.5 * max_c),
        Bound("cover_commute_upper", "cover-commute", math.e ** 3 * max_c * ln + n),
    ])
    for u, v in pairs:
        table.append(Bound(f"nash_williams[{u},{v}]", "nash-williams",
                           layered_cutsets(g, u, v).nash_williams()))
    return table
