"""Random Euler products and their mixed moments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _rng
from .errors import CapacityError, CoverageError, PreconditionError
from .primes import PrimeTable
from .rmf import ModelKind, RmfSample, prime_values

MAX_GRID_CELLS = 50_000_000


def level_cutoff(X: float, j: int) -> float:
    """Largest prime allowed in F_j: X^(e^-j)."""
    return X ** math.exp(-j)


def _check_sigma(sigma: float, X: float) -> None:
    if X >= 2 and sigma < -1.0 / math.log(X):
        raise PreconditionError(f"sigma={sigma} below -1/log X")


def _log_factors(kind: ModelKind, fp: np.ndarray, logp: np.ndarray, sigma: float, t: np.ndarray) -> np.ndarray:
    """Matrix (primes x t) of log local factors at s = 1/2 + sigma + it."""
    z = fp[:, None] * np.exp(-np.outer(logp, 0.5 + sigma + 1j * t))
    if kind is ModelKind.STEINHAUS:
        return -np.log1p(-z)
    return np.log1p(z)


def log_euler_product(sample: RmfSample, sigma: float, t: float, j: int, X: float, table: PrimeTable) -> complex:
    """log F_j(1/2 + sigma + it), summed factor by factor on the principal branch."""
    if j < 0:
        raise PreconditionError("level j must be nonnegative")
    _check_sigma(sigma, X)
    cutoff = level_cutoff(X, j)
    if cutoff < 2:
        return 0j
    primes = table.primes_in(1, cutoff)
    if primes.size and primes[-1] > sample.prime_limit:
        raise CoverageError("sample does not cover primes up to the level cutoff")
    fp = sample.values_for(primes)
    terms = _log_factors(sample.kind, fp, np.log(primes.astype(float)), sigma, np.array([float(t)]))[:, 0]
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


@dataclass(frozen=True, eq=False)
class EulerGrid:
    """log F_j(1/2 + sigma + it) for each level j (rows) and t (columns)."""

    sample: RmfSample
    sigma: float
    X: float
    t_grid: np.ndarray
    levels: tuple[int, ...]
    log_values: np.ndarray

    def row(self, j: int) -> np.ndarray:
        try:
            return self.log_values[self.levels.index(j)]
        except ValueError:
            raise CoverageError(f"level {j} not in grid") from None

    def abs_values(self, j: int) -> np.ndarray:
        return np.exp(self.row(j).real)

    def index_of(self, t: float) -> int:
        i = int(np.searchsorted(self.t_grid, t))
        for k in (i, i - 1):
            if 0 <= k < self.t_grid.size and self.t_grid[k] == t:
                return k
        raise CoverageError(f"t={t!r} not on grid")

    def log_abs(self, j: int, t: float) -> float:
        return float(self.row(j)[self.index_of(t)].real)


def evaluate_grid(
    sample: RmfSample,
    sigma: float,
    t_grid: Sequence[float],
    levels: Sequence[int],
    X: float,
    table: PrimeTable,
    chunk: int = 512,
) -> EulerGrid:
    """Euler products on a t-grid for several smoothness levels at once.

    Primes are split into bands between consecutive level cutoffs; each band
    is summed once per t and levels are assembled from the band totals, so
    every (prime, t) pair is visited exactly once. Within a band primes are
    accumulated in descending order.
    """
    _check_sigma(sigma, X)
    t = np.unique(np.asarray(t_grid, dtype=float))
    lv = sorted(set(int(j) for j in levels))
    if not lv or lv[0] < 0:
        raise PreconditionError("levels must be nonnegative and nonempty")
    cutoffs = [level_cutoff(X, j) for j in lv]
    top = table.primes_in(1, cutoffs[0]) if cutoffs[0] >= 2 else table.primes[:0]
    if top.size * t.size > MAX_GRID_CELLS:
        raise CapacityError("Euler grid too large")
    fp = sample.values_for(top)
    logp = np.log(top.astype(float))
    # band b holds primes in (cutoff[b+1], cutoff[b]]; the last band is everything below cutoff[-1]
    edges = [int(np.searchsorted(top, math.floor(c), side="right")) for c in cutoffs] + [0]
    bands = np.zeros((len(lv), t.size), dtype=np.complex128)
    for b in range(len(lv)):
        lo, hi = edges[b + 1], edges[b]
        for stop in range(hi, lo, -chunk):
            start = max(lo, stop - chunk)
            sl = slice(start, stop)
            block = _log_factors(sample.kind, fp[sl][::-1], logp[sl][::-1], sigma, t)
            bands[b] += block.sum(axis=0)
    out = np.cumsum(bands[::-1], axis=0)[::-1]
    return EulerGrid(sample, float(sigma), float(X), t, tuple(lv), out)


class MomentSpec(NamedTuple):
    """Mixed moment E prod_j prod_{x<p<=y} |local factor at 1/2+sigma+i t_j|^(2 alpha_j)."""

    alphas: tuple[float, ...]
    ts: tuple[float, ...]
    sigma: float
    x: float
    y: float

    @property
    def k(self) -> int:
        return len(self.alphas)

    @property
    def alpha_mass(self) -> float:
        return float(sum(abs(a) for a in self.alphas))

    def validate(self) -> None:
        if len(self.alphas) != len(self.ts) or not self.alphas:
            raise PreconditionError("alphas and ts must have equal positive length")
        if self.y < self.x:
            raise PreconditionError("need x <= y")
        if self.y >= 2 and self.sigma < -1.0 / math.log(self.y):
            raise PreconditionError("sigma below -1/log y")


class FormulaValue(NamedTuple):
    value: float
    log_value: float
    error_radius: float


def moment_error_radius(spec: MomentSpec) -> float:
    """M / (sqrt(x) log x) with M = max(A, A^3), A = sum |alpha_j|."""
    A = spec.alpha_mass
    M = max(A, A**3)
    return M / (math.sqrt(spec.x) * math.log(spec.x))


def expected_moment_formula(kind: ModelKind | str, spec: MomentSpec, table: PrimeTable, enforce_hypothesis: bool = True) -> FormulaValue:
    """Exponential main term of the mixed-moment asymptotic, summed prime by prime."""
    kind = ModelKind.parse(kind)
    spec.validate()
    if enforce_hypothesis and spec.x < 100 * (1 + spec.alpha_mass**2):
        raise PreconditionError("formula requires x >= 100 (1 + (sum |alpha|)^2)")
    radius = moment_error_radius(spec) if spec.x > 1 else math.inf
    p = table.primes_in(spec.x, spec.y).astype(float)
    if p.size == 0:
        return FormulaValue(1.0, 0.0, radius)
    logp = np.log(p)
    a = np.asarray(spec.alphas, dtype=float)
    t = np.asarray(spec.ts, dtype=float)
    num = np.full(p.size, float(np.sum(a**2)))
    for j in range(a.size):
        for l in range(j + 1, a.size):
            cross = np.cos((t[l] - t[j]) * logp)
            if kind is ModelKind.RADEMACHER:
                cross = cross + np.cos((t[l] + t[j]) * logp)
            num += 2 * a[j] * a[l] * cross
    if kind is ModelKind.RADEMACHER:
        for j in range(a.size):
            num += (a[j] ** 2 - a[j]) * np.cos(2 * t[j] * logp)
    log_value = math.fsum(num * p ** (-1 - 2 * spec.sigma))
    return FormulaValue(math.exp(log_value), log_value, radius)


def _local_log(kind: ModelKind, fp: np.ndarray, p: np.ndarray, spec: MomentSpec) -> np.ndarray:
    """log of the mixed product at each prime for given f(p) values (broadcast over leading axes)."""
    logp = np.log(p)
    out = np.zeros(np.broadcast(fp, p).shape)
    for a, t in zip(spec.alphas, spec.ts):
        if a == 0:
            continue
        z = fp * np.exp(-logp * (0.5 + spec.sigma + 1j * t))
        if kind is ModelKind.STEINHAUS:
            out += -2 * a * np.log(np.abs(1 - z))
        else:
            out += 2 * a * np.log(np.abs(1 + z))
    return out


def _one_prime_log_expectation(kind: ModelKind, p: np.ndarray, spec: MomentSpec, points: int) -> np.ndarray:
    if kind is ModelKind.RADEMACHER:
        both = np.stack([_local_log(kind, np.ones_like(p), p, spec), _local_log(kind, -np.ones_like(p), p, spec)])
        m = both.max(axis=0)
        # log1p/expm1 keep logs of order alpha accurate when alpha is tiny
        return m + np.log1p(np.mean(np.expm1(both - m), axis=0))
    theta = 2 * np.pi * np.arange(points) / points
    fp = np.exp(1j * theta)[:, None]
    vals = _local_log(kind, fp, p[None, :], spec)
    # trapezoid rule on a periodic integrand is the plain average
    m = vals.max(axis=0)
    return m + np.log1p(np.mean(np.expm1(vals - m), axis=0))


def expected_moment_oracle(
    kind: ModelKind | str,
    spec: MomentSpec,
    table: PrimeTable,
    quadrature_points: int = 512,
    tol: float = 1e-10,
    max_points: int = 1 << 16,
) -> float:
    """Exact mixed moment via independence: product over primes of one-prime expectations."""
    return math.exp(log_expected_moment_oracle(kind, spec, table, quadrature_points, tol, max_points))


def log_expected_moment_oracle(
    kind: ModelKind | str,
    spec: MomentSpec,
    table: PrimeTable,
    quadrature_points: int = 512,
    tol: float = 1e-10,
    max_points: int = 1 << 16,
) -> float:
    """Log of :func:`expected_moment_oracle`, kept separate so tiny logs survive.

    Steinhaus angular averages double ``quadrature_points`` until the log
    changes by less than ``tol``; Rademacher averages over +-1 exactly.
    """
    kind = ModelKind.parse(kind)
    spec.validate()
    p = table.primes_in(spec.x, spec.y).astype(float)
    if p.size == 0:
        return 0.0
    n = int(quadrature_points)
    total = math.fsum(_one_prime_log_expectation(kind, p, spec, n))
    if kind is ModelKind.STEINHAUS:
        while n < max_points:
            n *= 2
            refined = math.fsum(_one_prime_log_expectation(kind, p, spec, n))
            done = abs(refined - total) < tol
            total = refined
            if done:
                break
    return total


class MonteCarloEstimate(NamedTuple):
    estimate: float
    stderr: float


def monte_carlo_moment(
    kind: ModelKind | str,
    spec: MomentSpec,
    replicas: int,
    master_seed: int,
    table: PrimeTable,
    chunk: int = 8192,
    threads: int = 1,
) -> MonteCarloEstimate:
    """Sample mean and standard error of the mixed product over independent draws of f.

    Replica r uses the seed ``derive_seed(master_seed, r)``; chunks are fixed
    in size so the result does not depend on ``threads``.
    """
    kind = ModelKind.parse(kind)
    spec.validate()
    if replicas < 2:
        raise PreconditionError("need at least 2 replicas")
    p = table.primes_in(spec.x, spec.y)
    if all(a == 0 for a in spec.alphas) or p.size == 0:
        return MonteCarloEstimate(1.0, 0.0)
    pf = p.astype(float)

    def run(bounds):
        _, start, stop = bounds
        seeds = _rng.derive_seeds(master_seed, stop - start, start)
        fp = prime_values(kind, seeds[:, None], p[None, :])
        return np.exp(_local_log(kind, fp, pf[None, :], spec).sum(axis=1))

    draws = np.concatenate(_rng.parallel_map(run, _rng.chunk_bounds(replicas, chunk), threads))
    return MonteCarloEstimate(float(np.mean(draws)), float(np.std(draws, ddof=1) / math.sqrt(replicas)))
