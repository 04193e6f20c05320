"""Counter-based random streams usable from inside numba kernels.

Every trial owns a SplitMix64 stream keyed by ``(master_seed, trial_index)``,
so a batch produces the same numbers whether its trials run serially or
on a thread pool.
"""
import hashlib

import numba as nb
import numpy as np

# the bundled TBB is too old; skip it instead of warning on every parallel launch
nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0
MASK64 = (1 << 64) - 1


@nb.njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always", cache=True)
def derive(key, index):
    """Child key for ``index`` under ``key``; both uint64."""
    return mix64(key + (np.uint64(index) + np.uint64(1)) * GOLDEN)


@nb.njit(inline="always", cache=True)
def next_u64(state):
    state[0] += GOLDEN
    return mix64(state[0])


@nb.njit(inline="always", cache=True)
def uniform(state):
    return np.float64(next_u64(state) >> np.uint64(11)) * _INV53


@nb.njit(inline="always", cache=True)
def uniform_open(state):
    # strictly inside (0, 1) so -log never returns inf
    return (np.float64(next_u64(state) >> np.uint64(11)) + 0.5) * _INV53


@nb.njit(inline="always", cache=True)
def randbelow(state, k):
    j = np.int64(uniform(state) * k)
    return j if j < k else k - 1


@nb.njit(inline="always", cache=True)
def exponential(state, rate):
    return -np.log(uniform_open(state)) / rate


def _mix64_py(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_py(key, index):
    """Pure-python twin of :func:`derive` for building keys outside kernels."""
    return _mix64_py((key & MASK64) + ((index + 1) * 0x9E3779B97F4A7C15))


def label_key(seed, label):
    """Stable key for a named sub-experiment (never uses ``hash()``)."""
    digest = hashlib.sha256(label.encode()).digest()
    return derive_py(seed, int.from_bytes(digest[:8], "little"))


def new_state(key):
    return np.array([_mix64_py(key)], dtype=np.uint64)
