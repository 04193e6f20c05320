"""Graph families, each a pure function of ``(params, seed)``.

Labelings:
    path/cycle     0..n-1 in order along the path/cycle
    complete/star  star centre is 0
    hypercube      vertex = its binary code, edges flip one bit
    kary_tree      heap order, root 0, children of i are k*i+1 .. k*i+k
    torus2d        row-major, vertex (r, c) -> r*side + c
    lollipop       clique 0..k-1, path k..n-1 hanging off vertex k-1
    prism          K_{n/2} on 0..h-1 and on h..2h-1, i matched to i+h
    harary         circulant on 0..n-1
    harary_torus   row-major on a side x side torus
"""
from __future__ import annotations

import inspect
import itertools
import math

import networkx as nx
import numpy as np

from ._rng import derive_py
from .errors import GenerationError, GraphValidationError, InvalidParamsError
from .graph import Graph

MAX_RETRIES = 100

_FAMILIES: dict = {}


def _family(name, random=False):
    def register(fn):
        _FAMILIES[name] = (fn, random)
        return fn
    return register


def families() -> list:
    return sorted(_FAMILIES)


def generate(family: str, params: dict = None, seed: int = None) -> Graph:
    """Build a graph of ``family``; random families are deterministic in ``seed``."""
    params = dict(params or {})
    try:
        fn, random = _FAMILIES[family]
    except KeyError:
        raise InvalidParamsError(f"unknown family {family!r}; known: {', '.join(families())}") from None
    wanted = set(inspect.signature(fn).parameters) - {"seed"}
    if set(params) != wanted:
        raise InvalidParamsError(f"{family} takes parameters {sorted(wanted)}, got {sorted(params)}")
    if not random:
        edges, n = fn(**params)
        return Graph(n, edges, family_tag=family, params=params)
    if seed is None:
        raise InvalidParamsError(f"family {family!r} is random and needs a seed")
    last = None
    for attempt in range(MAX_RETRIES):
        sub = derive_py(seed, attempt)
        edges, n = fn(seed=sub, **params)
        try:
            return Graph(n, edges, family_tag=family, gen_seed=seed, params=params)
        except GraphValidationError as exc:
            last = exc
    raise GenerationError(f"{family}: no connected sample after {MAX_RETRIES} attempts ({last})")


def _need(cond, msg):
    if not cond:
        raise InvalidParamsError(msg)


def _int(x, name):
    if isinstance(x, bool) or int(x) != x:
        raise InvalidParamsError(f"{name} must be an integer, got {x!r}")
    return int(x)


@_family("path")
def path(n):
    n = _int(n, "n")
    _need(n >= 2, "path needs n >= 2")
    return [(i, i + 1) for i in range(n - 1)], n


@_family("cycle")
def cycle(n):
    n = _int(n, "n")
    _need(n >= 3, "cycle needs n >= 3")
    return [(i, (i + 1) % n) for i in range(n)], n


@_family("complete")
def complete(n):
    n = _int(n, "n")
    _need(n >= 2, "complete graph needs n >= 2")
    return list(itertools.combinations(range(n), 2)), n


@_family("star")
def star(n):
    n = _int(n, "n")
    _need(n >= 2, "star needs n >= 2")
    return [(0, i) for i in range(1, n)], n


@_family("hypercube")
def hypercube(d):
    d = _int(d, "d")
    _need(1 <= d <= 20, "hypercube dimension must be in 1..20")
    n = 1 << d
    return [(v, v | (1 << b)) for v in range(n) for b in range(d) if not v & (1 << b)], n


@_family("kary_tree")
def kary_tree(k, height):
    k, height = _int(k, "k"), _int(height, "height")
    _need(k >= 1 and height >= 1, "kary_tree needs k >= 1, height >= 1")
    n = height + 1 if k == 1 else (k ** (height + 1) - 1) // (k - 1)
    return [((i - 1) // k, i) for i in range(1, n)], n


@_family("torus2d")
def torus2d(side):
    s = _int(side, "side")
    _need(s >= 3, "torus2d needs side >= 3")
    edges = []
    for r in range(s):
        for c in range(s):
            v = r * s + c
            edges.append((v, r * s + (c + 1) % s))
            edges.append((v, ((r + 1) % s) * s + c))
    return edges, s * s


@_family("lollipop")
def lollipop(n):
    """Clique on ``round(2n/3)`` vertices with a path of the rest attached."""
    n = _int(n, "n")
    _need(n >= 4, "lollipop needs n >= 4")
    k = max(2, round(2 * n / 3))
    edges = list(itertools.combinations(range(k), 2))
    edges += [(i - 1, i) for i in range(k, n)]
    return edges, n


@_family("prism")
def prism(n):
    """K_{n/2} x K_2."""
    n = _int(n, "n")
    _need(n >= 4 and n % 2 == 0, "prism needs even n >= 4")
    h = n // 2
    edges = list(itertools.combinations(range(h), 2))
    edges += [(u + h, v + h) for u, v in itertools.combinations(range(h), 2)]
    edges += [(i, i + h) for i in range(h)]
    return edges, n


@_family("petersen")
def petersen():
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return outer + spokes + inner, 10


@_family("harary")
def harary(k, n):
    """Harary graph H_{k,n}: k-connected with the fewest edges."""
    k, n = _int(k, "k"), _int(n, "n")
    _need(2 <= k < n, "harary needs 2 <= k < n")
    edges = {(min(i, (i + j) % n), max(i, (i + j) % n))
             for i in range(n) for j in range(1, k // 2 + 1)}
    if k % 2:
        if n % 2 == 0:
            extra = [(i, i + n // 2) for i in range(n // 2)]
        else:
            extra = [(i, (i + (n + 1) // 2) % n) for i in range((n + 1) // 2)]
        edges.update((min(a, b), max(a, b)) for a, b in extra)
    return sorted(edges), n


def _torus_offsets(s):
    """Half-plane offsets on an s x s torus: axis offsets by distance, then the rest by L1."""
    half = (s - 1) // 2
    axis = []
    for j in range(1, half + 1):
        axis += [(0, j), (j, 0)]

    def canon(a, b):
        a, b = a % s, b % s
        a = a - s if a > s / 2 else a
        b = b - s if b > s / 2 else b
        return a, b

    rest = set()
    for a in range(s):
        for b in range(s):
            o = canon(a, b)
            neg = canon(-o[0], -o[1])
            if o == (0, 0) or o == neg or o in axis or neg in axis:
                continue
            rest.add(max(o, neg))
    rest = sorted(rest, key=lambda o: (abs(o[0]) + abs(o[1]), abs(o[0]), o))
    return axis + rest


@_family("harary_torus")
def harary_torus(d, n):
    """Two-dimensional circulant on a sqrt(n) x sqrt(n) torus with degree d or d+1.

    Each vertex joins its nearest neighbours along its row and column
    (offsets +-1, +-2, ... alternating between the axes), then diagonal
    offsets by L1 distance once the axes are used up. For odd ``d`` a
    matching is added: the antipodal column offset when the side is even,
    otherwise a Harary-style half-turn pairing on the row-major order,
    which gives one extra edge to some vertices.
    """
    d, n = _int(d, "d"), _int(n, "n")
    s = math.isqrt(n)
    _need(s * s == n and s >= 3, "harary_torus needs n = side^2 with side >= 3")
    _need(4 <= d <= n - 1, "harary_torus needs 4 <= d <= n-1")
    offsets = _torus_offsets(s)
    half = d // 2
    _need(half <= len(offsets), f"degree {d} too large for a {s}x{s} torus circulant")
    edges = set()
    for a, b in offsets[:half]:
        for r in range(s):
            for c in range(s):
                u = r * s + c
                v = ((r + a) % s) * s + (c + b) % s
                edges.add((min(u, v), max(u, v)))
    if d % 2:
        if s % 2 == 0:
            pairs = [(r * s + c, r * s + (c + s // 2) % s) for r in range(s) for c in range(s)]
        else:
            pairs = [(i, (i + (n + 1) // 2) % n) for i in range((n + 1) // 2)]
        edges.update((min(u, v), max(u, v)) for u, v in pairs)
    edges = sorted(edges)
    deg = np.bincount(np.asarray(edges).ravel(), minlength=n)
    if deg.min() != d or deg.max() > d + 1:
        raise GenerationError(f"harary_torus(d={d}, n={n}) produced degrees {deg.min()}..{deg.max()}")
    return edges, n


@_family("random_regular", random=True)
def random_regular(d, n, seed):
    d, n = _int(d, "d"), _int(n, "n")
    _need(0 < d < n and (d * n) % 2 == 0, "random_regular needs 0 < d < n and d*n even")
    g = nx.random_regular_graph(d, n, seed=seed % (2 ** 32))
    return list(g.edges()), n


def edge_probabilities(weights) -> np.ndarray:
    """Matrix of min(1, d_i d_j / sum(d)) for i != j."""
    w = np.asarray(weights, dtype=float)
    p = np.minimum(1.0, np.outer(w, w) / w.sum())
    np.fill_diagonal(p, 0.0)
    return p


def sample_generalized_random_edges(weights, seed) -> np.ndarray:
    """One unconditioned draw of G(d); may be disconnected."""
    w = np.asarray(weights, dtype=float)
    _need(w.ndim == 1 and len(w) >= 2 and np.all(w > 0), "weights must be a positive vector, n >= 2")
    n = len(w)
    iu, ju = np.triu_indices(n, 1)
    p = edge_probabilities(w)[iu, ju]
    rng = np.random.Generator(np.random.Philox(seed))
    keep = rng.random(len(p)) < p
    return np.column_stack([iu[keep], ju[keep]])


@_family("generalized_random", random=True)
def generalized_random(weights, seed):
    return sample_generalized_random_edges(weights, seed), len(weights)


def default_weights(n: int) -> list:
    """Power-law-ish expected degrees with a floor of 3 ln n (keeps samples connected)."""
    floor = 3 * math.log(n)
    return [round(floor * math.sqrt(n / (i + 1)) ** 0.5, 6) for i in range(n)]


# families sized by a single target n, used for suites and sweeps
_SIZERS: dict = {
    "path": lambda n: ("path", {"n": n}),
    "cycle": lambda n: ("cycle", {"n": n}),
    "complete": lambda n: ("complete", {"n": n}),
    "star": lambda n: ("star", {"n": n}),
    "hypercube": lambda n: ("hypercube", {"d": max(1, round(math.log2(n)))}),
    "kary_tree": lambda n: ("kary_tree", {"k": 2, "height": max(1, round(math.log2(n + 1)) - 1)}),
    "torus2d": lambda n: ("torus2d", {"side": max(3, round(math.sqrt(n)))}),
    "lollipop": lambda n: ("lollipop", {"n": n}),
    "prism": lambda n: ("prism", {"n": n + n % 2}),
    "harary": lambda n: ("harary", {"k": 4, "n": n}),
    "harary_torus": lambda n: ("harary_torus", {"d": 6, "n": max(3, round(math.sqrt(n))) ** 2}),
    "random_regular": lambda n: ("random_regular", {"d": 8, "n": n + n % 2}),
    "generalized_random": lambda n: ("generalized_random", {"weights": default_weights(n)}),
}

SUITE_FAMILIES = ("path", "cycle", "complete", "hypercube", "kary_tree", "torus2d",
                  "lollipop", "prism", "harary", "harary_torus", "random_regular",
                  "generalized_random")


def sized(family: str, n: int, seed: int = 0) -> Graph:
    """Member of ``family`` with (about) ``n`` vertices; exact n where the family allows."""
    try:
        fam, params = _SIZERS[family](n)
    except KeyError:
        raise InvalidParamsError(f"family {family!r} has no size-indexed form") from None
    return generate(fam, params, seed if _FAMILIES[fam][1] else None)


def suite(n: int, seed: int = 0, families_: tuple = SUITE_FAMILIES) -> list:
    return [sized(f, n, seed) for f in families_]
