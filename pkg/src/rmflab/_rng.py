"""Counter-based randomness.

Every random quantity in the package is a pure function of a 64-bit key and
an integer counter, so results never depend on generation order or on how
work is split across threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_KEY_SALT = np.uint64(0xD1B54A32D192ED03)
_CHILD_SALT = 0xA0761D6478BD642F

T = TypeVar("T")
R = TypeVar("R")


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _as_u64(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype.kind == "i":
        return arr.astype(np.int64).view(np.uint64)
    if arr.dtype.kind == "u":
        return arr.astype(np.uint64)
    # python ints beyond 64 bits, or floats holding integers
    flat = [int(v) & _MASK for v in np.ravel(arr)]
    return np.asarray(flat, dtype=np.uint64).reshape(arr.shape)


def prf_bits(keys, counters) -> np.ndarray:
    """Return 64 pseudo-random bits for each (key, counter) pair.

    ``keys`` and ``counters`` broadcast against each other.
    """
    k = _as_u64(keys)
    c = _as_u64(counters)
    with np.errstate(over="ignore"):
        hk = _mix(k ^ _KEY_SALT)
        return _mix(hk ^ (c * _GOLDEN))


def unit_uniform(bits: np.ndarray) -> np.ndarray:
    """Map 64-bit words to doubles in [0, 1) using the top 53 bits."""
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def derive_seed(master_seed: int, index: int) -> int:
    """Child seed for replica ``index`` of a run seeded with ``master_seed``."""
    return int(prf_bits(np.uint64(master_seed & _MASK), np.uint64((index ^ _CHILD_SALT) & _MASK)))


def derive_seeds(master_seed: int, count: int, start: int = 0) -> np.ndarray:
    idx = np.arange(start, start + count, dtype=np.uint64) ^ np.uint64(_CHILD_SALT)
    return prf_bits(np.uint64(master_seed & _MASK), idx)


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(key=[seed & _MASK, stream & _MASK]))


def chunk_bounds(total: int, chunk: int) -> list[tuple[int, int, int]]:
    """Fixed decomposition of ``range(total)`` into (index, start, stop) chunks."""
    return [(i, s, min(s + chunk, total)) for i, s in enumerate(range(0, total, chunk))]


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Ordered map over ``items``; output order never depends on ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def concat(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts) if parts else np.empty(0)
