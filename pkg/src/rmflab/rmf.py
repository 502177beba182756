"""Steinhaus and Rademacher random multiplicative functions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from . import _rng
from .errors import CapacityError, CoverageError, PreconditionError
from .primes import PrimeTable

#: Largest N accepted by :func:`values_up_to` by default.
MAX_VALUE_TABLE = 30_000_000


class ModelKind(str, enum.Enum):
    STEINHAUS = "steinhaus"
    RADEMACHER = "rademacher"

    @classmethod
    def parse(cls, value: "ModelKind | str") -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise PreconditionError(f"unknown model kind {value!r}") from None


def prime_values(kind: ModelKind, seeds, primes) -> np.ndarray:
    """f(p) as a pure function of (seed, p); ``seeds`` and ``primes`` broadcast.

    Steinhaus angles use the top 53 bits of the word, Rademacher signs the top bit.
    """
    bits = _rng.prf_bits(seeds, primes)
    if ModelKind.parse(kind) is ModelKind.STEINHAUS:
        return np.exp(2j * np.pi * _rng.unit_uniform(bits))
    sign = 1.0 - 2.0 * (bits >> np.uint64(63)).astype(np.float64)
    return sign.astype(np.complex128)


@dataclass(frozen=True, eq=False)
class RmfSample:
    """One realisation of f, stored as its values on primes up to ``prime_limit``.

    Primes up to ``split`` (when set) come from ``master_seed``; primes above
    it come from ``fresh_seed``. This is how conditioning on small primes is
    represented.
    """

    kind: ModelKind
    master_seed: int
    prime_limit: int
    primes: np.ndarray
    values: np.ndarray
    split: int | None = None
    fresh_seed: int | None = None

    def value_of_prime(self, p: int) -> complex:
        i = int(np.searchsorted(self.primes, p))
        if i >= self.primes.size or self.primes[i] != p:
            raise CoverageError(f"{p} is not a covered prime (limit {self.prime_limit})")
        return complex(self.values[i])

    def values_for(self, primes: np.ndarray) -> np.ndarray:
        """f(p) for an ascending array of covered primes."""
        primes = np.asarray(primes, dtype=np.int64)
        if primes.size == 0:
            return np.empty(0, dtype=np.complex128)
        if primes[-1] > self.prime_limit:
            raise CoverageError(f"prime {primes[-1]} beyond prime_limit {self.prime_limit}")
        idx = np.searchsorted(self.primes, primes)
        return self.values[idx]

    def dense(self, N: int) -> np.ndarray:
        """Array of length N + 1 holding f(p) at prime indices and 0 elsewhere."""
        out = np.zeros(N + 1, dtype=np.complex128)
        keep = self.primes <= N
        out[self.primes[keep]] = self.values[keep]
        return out

    def with_prime_value(self, p: int, value: complex) -> "RmfSample":
        """Copy with f(p) overwritten (fault injection, degenerate cases)."""
        i = int(np.searchsorted(self.primes, p))
        if i >= self.primes.size or self.primes[i] != p:
            raise CoverageError(f"{p} is not a covered prime")
        vals = self.values.copy()
        vals[i] = value
        return replace(self, values=vals)


def sample_model(kind: ModelKind | str, master_seed: int, prime_limit: int, table: PrimeTable) -> RmfSample:
    """Draw f(p) for every prime p <= prime_limit."""
    kind = ModelKind.parse(kind)
    if prime_limit > table.limit:
        raise CoverageError(f"prime_limit {prime_limit} exceeds table limit {table.limit}")
    primes = table.primes[: table.pi(prime_limit)]
    vals = prime_values(kind, np.uint64(master_seed & _rng._MASK), primes)
    return RmfSample(kind, int(master_seed), int(prime_limit), primes, vals)


def constant_sample(kind: ModelKind | str, value: complex, prime_limit: int, table: PrimeTable) -> RmfSample:
    """Degenerate sample with f(p) = value for every prime (e.g. 1, or -1 for Mobius)."""
    kind = ModelKind.parse(kind)
    primes = table.primes[: table.pi(prime_limit)]
    vals = np.full(primes.size, complex(value), dtype=np.complex128)
    return RmfSample(kind, 0, int(prime_limit), primes, vals)


def hybrid_sample(base: RmfSample, resample_above: int, fresh_seed: int) -> RmfSample:
    """Keep f(p) for p <= resample_above and redraw larger primes from ``fresh_seed``."""
    if resample_above > base.prime_limit:
        raise PreconditionError("resample_above exceeds the sample's prime_limit")
    vals = base.values.copy()
    large = base.primes > resample_above
    vals[large] = prime_values(base.kind, np.uint64(fresh_seed & _rng._MASK), base.primes[large])
    return replace(base, values=vals, split=int(resample_above), fresh_seed=int(fresh_seed))


def _factorize(n: int) -> list[tuple[int, int]]:
    out = []
    m = n
    p = 2
    while p * p <= m:
        if m % p == 0:
            a = 0
            while m % p == 0:
                m //= p
                a += 1
            out.append((p, a))
        p += 1 if p == 2 else 2
    if m > 1:
        out.append((m, 1))
    return out


def value_at(sample: RmfSample, n: int) -> complex:
    """f(n) by trial-division factorisation."""
    n = int(n)
    if n < 1:
        raise PreconditionError("n must be positive")
    result = 1 + 0j
    for p, a in _factorize(n):
        if p > sample.prime_limit:
            raise CoverageError(f"prime factor {p} of {n} beyond prime_limit {sample.prime_limit}")
        if sample.kind is ModelKind.RADEMACHER and a > 1:
            return 0j
        result *= sample.value_of_prime(p) ** a
    return result


@dataclass(frozen=True, eq=False)
class ValueTable:
    """f(n) for 0 <= n <= N; index 0 is unused and holds 0."""

    N: int
    values: np.ndarray
    sample: RmfSample

    def prefix_sums(self) -> np.ndarray:
        """Cumulative sums; entry m is sum_{n<=m} f(n)."""
        return np.cumsum(self.values)


def values_up_to(sample: RmfSample, N: int, table: PrimeTable, max_entries: int = MAX_VALUE_TABLE) -> ValueTable:
    """Evaluate f on 1..N through the smallest-prime-factor recursion.

    Work proceeds in dyadic blocks [2^k, 2^(k+1)); every entry read while
    filling a block lies in an earlier block, so the result is the same
    whatever order blocks are scheduled in.
    """
    N = int(N)
    if N + 1 > max_entries:
        raise CapacityError(f"N={N} exceeds value-table budget {max_entries}")
    if N > table.limit:
        raise CoverageError(f"N={N} exceeds table limit {table.limit}")
    if N > sample.prime_limit:
        raise CoverageError(f"N={N} exceeds sample prime_limit {sample.prime_limit}")
    fp = sample.dense(N)
    spf = table.smallest_prime_factor
    vals = np.zeros(N + 1, dtype=np.complex128)
    if N >= 1:
        vals[1] = 1.0
    rad = sample.kind is ModelKind.RADEMACHER
    lo = 2
    while lo <= N:
        hi = min(2 * lo, N + 1)
        n = np.arange(lo, hi)
        s = spf[lo:hi].astype(np.int64)
        q = n // s
        block = fp[s] * vals[q]
        if rad:
            block[q % s == 0] = 0.0
        vals[lo:hi] = block
        lo = hi
    return ValueTable(N, vals, sample)
