"""Sieving, smooth numbers and sums over primes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import CapacityError, CoverageError, PreconditionError

#: Largest sieve limit accepted by default (entries of the factor arrays).
MAX_TABLE_ENTRIES = 60_000_000


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Primes up to ``limit`` plus smallest-prime-factor array.

    ``smallest_prime_factor[n]`` is the least prime dividing ``n`` for
    ``2 <= n <= limit``; index 1 holds 1 and index 0 holds 0.
    """

    limit: int
    primes: np.ndarray
    smallest_prime_factor: np.ndarray

    @cached_property
    def largest_prime_factor(self) -> np.ndarray:
        """Largest prime factor of each n <= limit (1 for n = 1)."""
        spf = self.smallest_prime_factor
        lpf = np.zeros_like(spf)
        if self.limit >= 1:
            lpf[1] = 1
        lo = 2
        # n // spf[n] <= n / 2, so each dyadic block only reads earlier blocks
        while lo <= self.limit:
            hi = min(2 * lo, self.limit + 1)
            n = np.arange(lo, hi)
            s = spf[lo:hi]
            lpf[lo:hi] = np.maximum(s, lpf[n // s])
            lo = hi
        return lpf

    @cached_property
    def is_prime(self) -> np.ndarray:
        flags = np.zeros(self.limit + 1, dtype=bool)
        flags[self.primes] = True
        return flags

    def primes_in(self, x: float, y: float) -> np.ndarray:
        """Primes p with x < p <= y."""
        if math.floor(y) > self.limit:
            raise CoverageError(f"upper end {y} exceeds table limit {self.limit}")
        lo = np.searchsorted(self.primes, math.floor(x), side="right")
        hi = np.searchsorted(self.primes, math.floor(y), side="right")
        return self.primes[lo:hi]

    def pi(self, x: float) -> int:
        return int(np.searchsorted(self.primes, math.floor(x), side="right"))


def build_prime_table(limit: int, max_entries: int = MAX_TABLE_ENTRIES) -> PrimeTable:
    """Sieve the smallest prime factor of every n <= limit."""
    limit = int(limit)
    if limit < 2:
        raise PreconditionError("limit must be at least 2")
    if limit + 1 > max_entries:
        raise CapacityError(f"limit {limit} exceeds budget of {max_entries} entries")
    dtype = np.int32 if limit < 2**31 - 1 else np.int64
    spf = np.zeros(limit + 1, dtype=dtype)
    spf[1] = 1
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            seg = spf[p * p :: p]
            seg[seg == 0] = p
    rest = np.flatnonzero(spf == 0)
    rest = rest[rest >= 2]
    spf[rest] = rest
    primes = np.flatnonzero(spf[2:] == np.arange(2, limit + 1)) + 2
    return PrimeTable(limit=limit, primes=primes.astype(np.int64), smallest_prime_factor=spf)


def _window(table: PrimeTable, x: float, y: float) -> np.ndarray:
    if math.floor(y) > table.limit:
        raise CoverageError(f"y={y} exceeds table limit {table.limit}")
    if x > y:
        raise PreconditionError("need x <= y")
    return table.primes_in(x, y)


def prime_power_sum(table: PrimeTable, x: float, y: float, s: complex) -> complex:
    """Exact sum of p**(-s) over primes x < p <= y.

    Real and imaginary parts are accumulated with ``math.fsum``.
    """
    s = complex(s)
    if s.real <= 0:
        raise PreconditionError("need Re(s) > 0")
    p = _window(table, x, y).astype(np.float64)
    if p.size == 0:
        return 0j
    logp = np.log(p)
    mag = np.exp(-s.real * logp)
    phase = -s.imag * logp
    return complex(math.fsum(mag * np.cos(phase)), math.fsum(mag * np.sin(phase)))


def prime_kernel(table: PrimeTable, x: float, y: float, shifts, chunk: int = 4096) -> np.ndarray:
    """Vectorised ``sum_{x<p<=y} p**(-1 - i h)`` for each shift h.

    Same quantity as ``prime_power_sum(table, x, y, 1 + 1j*h)``, with numpy's
    pairwise summation instead of fsum.
    """
    h = np.atleast_1d(np.asarray(shifts, dtype=np.float64))
    p = _window(table, x, y).astype(np.float64)
    out = np.zeros(h.shape, dtype=np.complex128)
    if p.size == 0:
        return out
    logp = np.log(p)
    w = 1.0 / p
    flat = h.ravel()
    res = out.ravel()
    for start in range(0, flat.size, chunk):
        hh = flat[start : start + chunk]
        res[start : start + chunk] = np.exp(-1j * np.outer(hh, logp)) @ w
    return res.reshape(h.shape)


def mertens_residual(table: PrimeTable, x: float, y: float) -> float:
    """sum_{x<p<=y} 1/p minus (loglog y - loglog x)."""
    if x < 100:
        raise PreconditionError("mertens_residual needs x >= 100")
    total = prime_power_sum(table, x, y, 1.0).real
    return total - (math.log(math.log(y)) - math.log(math.log(x)))


def smooth_count(table: PrimeTable, limit: int, smoothness: int) -> int:
    """Number of n <= limit whose prime factors are all <= smoothness."""
    limit = int(limit)
    if smoothness > table.limit:
        raise CoverageError("smoothness exceeds table limit")
    if limit < 1:
        return 0
    if smoothness >= limit:
        return limit
    if limit > table.limit:
        raise CoverageError(f"limit {limit} exceeds table limit {table.limit}")
    return int(np.count_nonzero(table.largest_prime_factor[1 : limit + 1] <= smoothness))


def von_mangoldt(n: int) -> float:
    """log p if n is a power of the prime p, else 0."""
    if n < 2:
        return 0.0
    m = n
    p = 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            return math.log(p) if m == 1 else 0.0
        p += 1
    return math.log(m)


@dataclass(frozen=True)
class DirichletPolynomial:
    """Finitely supported coefficients ``n -> a_n``.

    With ``weighted`` set, the polynomial is read as
    ``sum a_n Lambda(n) n**(-1-it)``.
    """

    coefficients: Mapping[int, complex] = field(default_factory=dict)
    weighted: bool = True

    def __post_init__(self):
        for n, a in self.coefficients.items():
            if int(n) < 1:
                raise PreconditionError(f"support index {n} must be positive")
            if not np.isfinite(complex(a)):
                raise PreconditionError(f"coefficient at {n} is not finite")

    @property
    def support(self) -> np.ndarray:
        return np.array(sorted(int(n) for n in self.coefficients), dtype=np.int64)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.support
        a = np.array([complex(self.coefficients[int(k)]) for k in n], dtype=np.complex128)
        return n, a


def mean_value_check(poly: DirichletPolynomial, T: float, quadrature_step: float | None = None) -> tuple[float, float]:
    """Both sides of the large-prime mean value inequality.

    ``lhs`` is the midpoint-rule value of the integral over [-T, T] of
    ``|sum a_n Lambda(n) n^(-1-it)|^2`` and ``rhs`` is
    ``sum |a_n|^2 Lambda(n) / n``. The caller compares lhs with C * rhs.
    """
    if T < 1:
        raise PreconditionError("need T >= 1")
    n, a = poly.arrays()
    if n.size == 0:
        return 0.0, 0.0
    if n.min() < T**1.01:
        raise PreconditionError("support must satisfy n >= T**1.01")
    lam = np.array([von_mangoldt(int(k)) for k in n]) if poly.weighted else np.ones(n.size)
    nf = n.astype(np.float64)
    logn = np.log(nf)
    coef = a * lam / nf
    max_step = 1.0 / (4.0 * logn.max())
    step = max_step if quadrature_step is None else min(quadrature_step, max_step)
    cells = max(1, math.ceil(2 * T / step))
    h = 2 * T / cells
    total = 0.0
    for start in range(0, cells, 8192):
        idx = np.arange(start, min(cells, start + 8192))
        t = -T + (idx + 0.5) * h
        vals = np.exp(-1j * np.outer(t, logn)) @ coef
        total += float(np.sum(np.abs(vals) ** 2))
    lhs = total * h
    rhs = float(math.fsum(np.abs(a) ** 2 * lam / nf))
    return lhs, rhs
