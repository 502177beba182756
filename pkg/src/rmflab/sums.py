"""Partial sums of f and their split into smooth and large-prime parts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import PreconditionError
from .primes import PrimeTable
from .rmf import RmfSample, ValueTable, values_up_to

LOWER_EXP = 8.0 / 7.0
UPPER_EXP = 4.0 / 3.0
SPACING = 2.0 * math.pi  # spacing of the x-grid in log x


def loglog(X: float) -> float:
    return math.log(math.log(X))


@dataclass(frozen=True)
class XGrid:
    """Points x_r = X^(8/7) * exp(2 pi r) for the listed r values."""

    X: float
    r_values: tuple[float, ...]
    exact_points: tuple[float, ...] | None = None  # kept when built from points, so endpoints stay exact

    def __post_init__(self):
        if self.X <= 1:
            raise PreconditionError("X must exceed 1")
        r = np.asarray(self.r_values, dtype=float)
        if r.size == 0:
            raise PreconditionError("grid needs at least one point")
        if np.any(np.diff(r) <= 0):
            raise PreconditionError("r values must be strictly increasing")

    @property
    def points(self) -> np.ndarray:
        if self.exact_points is not None:
            return np.asarray(self.exact_points, dtype=float)
        return self.X**LOWER_EXP * np.exp(SPACING * np.asarray(self.r_values, dtype=float))

    def __len__(self) -> int:
        return len(self.r_values)

    @classmethod
    def integer_steps(cls, X: float) -> "XGrid":
        """Integer r in [0, 2 log X / (21 pi)]; a single point unless X is astronomically large."""
        rmax = 2 * math.log(X) / (21 * math.pi)
        return cls(float(X), tuple(float(r) for r in range(0, int(math.floor(rmax)) + 1)))

    @classmethod
    def log_spaced(cls, X: float, count: int, lo_exp: float = LOWER_EXP, hi_exp: float = UPPER_EXP) -> "XGrid":
        """``count`` points evenly spaced in log x over [X^lo_exp, X^hi_exp]."""
        if count < 1:
            raise PreconditionError("count must be positive")
        return cls.from_points(X, float(X) ** np.linspace(lo_exp, hi_exp, count))

    @classmethod
    def from_points(cls, X: float, points: Sequence[float]) -> "XGrid":
        pts = np.asarray(points, dtype=float)
        r = (np.log(pts) - LOWER_EXP * math.log(X)) / SPACING
        return cls(float(X), tuple(float(v) for v in r), tuple(float(v) for v in pts))


@dataclass(frozen=True, eq=False)
class PartialSumSeries:
    grid: XGrid
    totals: np.ndarray
    smooth_parts: np.ndarray
    large_prime_parts: np.ndarray

    @property
    def residuals(self) -> np.ndarray:
        """|total - smooth - large| per point; zero up to rounding when x <= X^2."""
        return np.abs(self.totals - self.smooth_parts - self.large_prime_parts)


def _smooth_mask(table: PrimeTable, N: int, X: float) -> np.ndarray:
    return table.largest_prime_factor[: N + 1] <= X


def large_prime_part(sample: RmfSample, x: float, X: float, table: PrimeTable, prefix: np.ndarray | None = None) -> complex:
    """sum_{X<p<=x} f(p) * sum_{m<=x/p} f(m)."""
    primes = table.primes_in(X, x)
    if primes.size == 0:
        return 0j
    kmax = int(math.floor(x / primes[0]))
    if prefix is None or prefix.size <= kmax:
        prefix = values_up_to(sample, max(kmax, 1), table).prefix_sums()
    inner = prefix[np.floor(x / primes).astype(np.int64)]
    return complex(np.sum(sample.values_for(primes) * inner))


def partial_sums(sample: RmfSample, grid: XGrid, table: PrimeTable, values: ValueTable | None = None) -> PartialSumSeries:
    """Totals, X-smooth parts and large-prime parts at every grid point.

    The smooth part and the total come from direct enumeration; the large-prime
    part is assembled from prefix sums of f below X. For x <= X^2 the three
    satisfy total = smooth + large exactly.
    """
    pts = grid.points
    N = int(math.floor(pts[-1]))
    if values is None or values.N < N:
        values = values_up_to(sample, N, table)
    vals = values.values
    smooth_vals = np.where(_smooth_mask(table, values.N, grid.X), vals, 0)
    prefix = np.cumsum(vals[: int(math.floor(pts[-1] / grid.X)) + 2])
    totals = np.empty(len(pts), dtype=np.complex128)
    smooth = np.empty_like(totals)
    large = np.empty_like(totals)
    for i, x in enumerate(pts):
        k = int(math.floor(x))
        totals[i] = np.sum(vals[1 : k + 1])
        smooth[i] = np.sum(smooth_vals[1 : k + 1])
        large[i] = large_prime_part(sample, x, grid.X, table, prefix)
    return PartialSumSeries(grid, totals, smooth, large)


def smooth_sum(sample: RmfSample, x: float, X: float, table: PrimeTable, values: ValueTable | None = None) -> complex:
    """Sum of f(n) over X-smooth n <= x."""
    k = int(math.floor(x))
    if k < 1:
        return 0j
    if values is None or values.N < k:
        values = values_up_to(sample, k, table)
    mask = _smooth_mask(table, k, X)
    return complex(np.sum(values.values[1 : k + 1][mask[1:]]))


@dataclass(frozen=True)
class SmoothFilter:
    """Grid points whose smooth sum stays below sqrt(x) (loglog X)^threshold_exponent."""

    grid: XGrid
    admitted: tuple[bool, ...]
    threshold_exponent: float

    @property
    def admitted_r(self) -> tuple[float, ...]:
        return tuple(r for r, ok in zip(self.grid.r_values, self.admitted) if ok)

    @property
    def fraction(self) -> float:
        return sum(self.admitted) / len(self.admitted)


def select_R(series: PartialSumSeries, threshold_exponent: float = 0.01) -> SmoothFilter:
    grid = series.grid
    # compared in log space so huge exponents cannot overflow
    log_bound = 0.5 * np.log(grid.points) + threshold_exponent * math.log(loglog(grid.X))
    with np.errstate(divide="ignore"):
        admitted = np.log(np.abs(series.smooth_parts)) < log_bound
    return SmoothFilter(grid, tuple(bool(a) for a in admitted), float(threshold_exponent))


class ParsevalResult(NamedTuple):
    lhs: float
    rhs: float
    tail_bound: float


def _coefficient_arrays(coefficients) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(coefficients, Mapping):
        items = sorted((int(n), complex(a)) for n, a in coefficients.items() if a != 0)
    elif hasattr(coefficients, "coefficients"):
        return _coefficient_arrays(coefficients.coefficients)
    else:
        items = [(i + 1, complex(a)) for i, a in enumerate(coefficients) if a != 0]
    if any(n < 1 for n, _ in items):
        raise PreconditionError("coefficients must be indexed from 1")
    n = np.array([k for k, _ in items], dtype=np.int64)
    a = np.array([v for _, v in items], dtype=np.complex128)
    return n, a


def parseval_residual(coefficients, sigma: float, T: float, step: float | None = None) -> ParsevalResult:
    """Both sides of Parseval's identity for a finite Dirichlet series.

    ``lhs`` integrates |sum_{n<=x} a_n|^2 x^(-1-2 sigma) exactly, one step of
    the partial-sum function at a time (including the constant tail past the
    last support point). ``rhs`` is the midpoint-rule value of
    (1/2pi) int_{-T}^{T} |A(sigma+it)/(sigma+it)|^2 dt, and ``tail_bound``
    bounds the part of the rhs integral beyond |t| > T.
    """
    if sigma <= 0:
        raise PreconditionError("sigma must be positive")
    n, a = _coefficient_arrays(coefficients)
    if n.size == 0:
        return ParsevalResult(0.0, 0.0, 0.0)
    nf = n.astype(np.float64)
    A = np.cumsum(a)
    left = nf ** (-2 * sigma)
    right = np.append(nf[1:] ** (-2 * sigma), 0.0)
    lhs = math.fsum(np.abs(A) ** 2 * (left - right)) / (2 * sigma)

    logn = np.log(nf)
    coef = a * nf ** (-sigma)
    if step is None:
        step = sigma / 8
        if logn.max() > 0:
            step = min(step, 1.0 / (4 * logn.max()))
    cells = max(1, math.ceil(2 * T / step))
    h = 2 * T / cells
    acc = []
    for start in range(0, cells, 16384):
        idx = np.arange(start, min(cells, start + 16384))
        t = -T + (idx + 0.5) * h
        vals = np.exp(-1j * np.outer(t, logn)) @ coef
        acc.append(np.sum(np.abs(vals) ** 2 / (sigma**2 + t**2)))
    rhs = math.fsum(acc) * h / (2 * math.pi)
    tail = 2 * float(np.sum(np.abs(coef))) ** 2 / T / (2 * math.pi)
    return ParsevalResult(float(lhs), float(rhs), tail)
