"""Conditional covariances of the large-prime sums and their Gaussian model."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from . import _rng
from ._stats import wilson_interval
from .chaos import BarrierConfig, barrier_A_mask, chaos_integral, net_levels
from .errors import CoverageError, DecompositionError, PreconditionError
from .primes import PrimeTable, prime_kernel
from .products import evaluate_grid
from .rmf import ModelKind, RmfSample, prime_values, values_up_to
from .sums import UPPER_EXP, XGrid, loglog


class Method(str, enum.Enum):
    DIRECT_SUM = "direct_sum"
    PERRON_INTEGRAL = "perron_integral"
    BARRIERED_INTEGRAL = "barriered_integral"


class NearIntegerWarning(UserWarning):
    """x/p lies within X^(-1/2) of an integer, where truncated Perron is least accurate."""


# ---------------------------------------------------------------- direct sums


def _smooth_prefix(sample: RmfSample, upto: float, table: PrimeTable) -> np.ndarray:
    return values_up_to(sample, max(1, int(math.floor(upto))), table).prefix_sums()


def inner_sums(sample: RmfSample, points: Sequence[float], X: float, table: PrimeTable, p_max: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Matrix a[i, k] = sum_{m <= x_i/p_k} f(m) for primes X < p_k <= p_max (default: max point).

    Requires every x_i <= X^2 so that every m in range is X-smooth.
    """
    pts = np.asarray(points, dtype=float)
    if np.any(pts > X * X) or np.any(pts <= X):
        raise CoverageError("grid points must lie in (X, X^2]")
    p_max = float(pts.max()) if p_max is None else p_max
    primes = table.primes_in(X, p_max)
    if primes.size == 0:
        return np.zeros((pts.size, 0), dtype=np.complex128), primes
    prefix = _smooth_prefix(sample, pts.max() / primes[0], table)
    idx = np.floor(pts[:, None] / primes[None, :]).astype(np.int64)
    return prefix[idx], primes


def conditional_variance(sample: RmfSample, x: float, X: float, table: PrimeTable) -> float:
    """E[(Re Z_x)^2 | f(p), p <= X] with Z_x = x^(-1/2) sum_{X<p<=x} f(p) sum_{m<=x/p} f(m).

    Steinhaus: (1/2x) sum |inner|^2. Rademacher: (1/x) sum inner^2.
    """
    if not X < x <= X * X:
        raise CoverageError("need X < x <= X^2")
    a, _ = inner_sums(sample, [x], X, table)
    a = a[0]
    if sample.kind is ModelKind.STEINHAUS:
        return math.fsum(np.abs(a) ** 2) / (2 * x)
    return math.fsum(a.real**2) / x


def _pair_covariance(kind: ModelKind, ax: np.ndarray, ay: np.ndarray, x: float, y: float) -> float:
    if kind is ModelKind.STEINHAUS:
        prod = ax * np.conj(ay)
        return math.fsum(prod.real) / (2 * math.sqrt(x * y))
    return math.fsum(ax.real * ay.real) / math.sqrt(x * y)


def conditional_covariance(sample: RmfSample, x: float, y: float, X: float, table: PrimeTable) -> float:
    a, _ = inner_sums(sample, [x, y], X, table)
    return _pair_covariance(sample.kind, a[0], a[1], x, y)


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    grid: XGrid
    matrix: np.ndarray
    method: Method
    X: float


def covariance_matrix(sample: RmfSample, grid: XGrid, X: float, table: PrimeTable, threads: int = 1) -> CovarianceEstimate:
    """Exact conditional covariance matrix of (Re Z_x) over the grid.

    Each entry is an fsum over primes, so the diagonal is bit-identical to
    :func:`conditional_variance`.
    """
    pts = grid.points
    a, _ = inner_sums(sample, pts, X, table)
    n = pts.size
    pairs = [(i, j) for i in range(n) for j in range(i, n)]

    def entry(ij):
        i, j = ij
        if i == j:
            if sample.kind is ModelKind.STEINHAUS:
                return math.fsum(np.abs(a[i]) ** 2) / (2 * pts[i])
            return math.fsum(a[i].real ** 2) / pts[i]
        return _pair_covariance(sample.kind, a[i], a[j], pts[i], pts[j])

    vals = _rng.parallel_map(entry, pairs, threads)
    M = np.zeros((n, n))
    for (i, j), v in zip(pairs, vals):
        M[i, j] = M[j, i] = v
    return CovarianceEstimate(grid, M, Method.DIRECT_SUM, float(X))


def hybrid_large_prime_sums(
    sample: RmfSample,
    points: Sequence[float],
    X: float,
    table: PrimeTable,
    replicas: int,
    master_seed: int,
    chunk: int = 4096,
    threads: int = 1,
) -> np.ndarray:
    """Z_x for each replica (rows) and point (columns) with primes above X redrawn.

    Replica r uses fresh seed ``derive_seed(master_seed, r)``, giving the same
    values as ``hybrid_sample(sample, X, derive_seed(master_seed, r))``.
    """
    pts = np.asarray(points, dtype=float)
    a, primes = inner_sums(sample, pts, X, table)
    weights = (a / np.sqrt(pts)[:, None]).T  # primes x points

    def run(bounds):
        _, start, stop = bounds
        seeds = _rng.derive_seeds(master_seed, stop - start, start)
        fp = prime_values(sample.kind, seeds[:, None], primes[None, :])
        return fp @ weights

    parts = _rng.parallel_map(run, _rng.chunk_bounds(replicas, chunk), threads)
    if primes.size == 0:
        return np.zeros((replicas, pts.size), dtype=np.complex128)
    return np.concatenate(parts)


def variance_lower_bound_ratio(sample: RmfSample, x: float, X: float, table: PrimeTable) -> float:
    """(1/x) sum |inner|^2 divided by (1/log X) int_1^{X^(1/7)} |S(z)|^2 z^-2 dz, integral exact."""
    a, _ = inner_sums(sample, [x], X, table)
    lhs = math.fsum(np.abs(a[0]) ** 2) / x
    Z = X ** (1 / 7)
    N = int(math.floor(Z))
    S = np.abs(_smooth_prefix(sample, max(N, 1), table)[1 : N + 1]) ** 2
    n = np.arange(1, N + 1, dtype=float)
    upper = np.minimum(n + 1, Z)
    integral = math.fsum(S * (1 / n - 1 / upper))
    rhs = integral / math.log(X)
    return lhs / rhs if rhs > 0 else math.inf


# ---------------------------------------------------------------- gaussian model


def psd_factor(matrix: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """L with L @ L.T == matrix, via a symmetric eigendecomposition.

    Eigenvalues in [-tol * lambda_max, 0) are roundoff and set to zero, as
    are positive ones below dim * machine epsilon * lambda_max; anything more
    negative raises DecompositionError.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise PreconditionError("covariance must be square")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max(initial=0))):
        raise DecompositionError("covariance is not symmetric")
    lam, V = np.linalg.eigh((M + M.T) / 2)
    top = max(float(lam.max(initial=0.0)), 0.0)
    if top == 0.0:
        if lam.size and lam.min() < 0:
            raise DecompositionError("covariance is negative definite")
        return np.zeros_like(M)
    if lam.min() < -tol * top:
        raise DecompositionError(f"covariance indefinite: eigenvalue {lam.min():.3e} vs max {top:.3e}")
    floor = M.shape[0] * np.finfo(float).eps * top
    lam = np.where(lam < floor, 0.0, lam)
    return V * np.sqrt(lam)


def sample_gaussian_vector(cov: CovarianceEstimate | np.ndarray, count: int, seed: int, chunk: int = 1 << 14) -> np.ndarray:
    """``count`` mean-zero Gaussian vectors (rows) with the given covariance."""
    M = cov.matrix if isinstance(cov, CovarianceEstimate) else np.asarray(cov, dtype=float)
    L = psd_factor(M)
    d = M.shape[0]
    out = np.empty((count, d))
    for idx, start, stop in _rng.chunk_bounds(count, chunk):
        z = _rng.generator(seed, idx).standard_normal((stop - start, d))
        out[start:stop] = z @ L.T
    return out


class MaxComparison(NamedTuple):
    n: int
    epsilon: float
    delta: float
    threshold: float
    probability: float
    interval: tuple[float, float]
    median_max: float


_BLOCK = 256


def _exchangeable_max(n: int, epsilon: float, rows: int, seed: int, chunk_index: int) -> np.ndarray:
    # columns come in fixed blocks with their own streams, so a smaller n sees a prefix of the same draws
    base = chunk_index << 32
    m = np.full(rows, -np.inf)
    for b in range(0, -(-n // _BLOCK)):
        z = _rng.generator(seed, base + b + 1).standard_normal((rows, _BLOCK))
        width = min(_BLOCK, n - b * _BLOCK)
        m = np.maximum(m, z[:, :width].max(axis=1))
    z0 = _rng.generator(seed, base).standard_normal(rows)
    return math.sqrt(epsilon) * z0 + math.sqrt(1 - epsilon) * m


def max_comparison_experiment(
    n: int,
    epsilon: float,
    delta: float,
    replicas: int,
    seed: int,
    chunk: int = 2048,
    threads: int = 1,
    enforce_range: bool = False,
) -> MaxComparison:
    """P(max_i X_i <= sqrt((2 - delta) log n)) for X_i = sqrt(eps) Z_0 + sqrt(1 - eps) Z_i."""
    if n < 1 or not 0 <= epsilon < 1:
        raise PreconditionError("need n >= 1 and 0 <= epsilon < 1")
    if enforce_range and not 100 * epsilon <= delta <= 0.01:
        raise PreconditionError("need 100 epsilon <= delta <= 1/100")
    u = math.sqrt((2 - delta) * math.log(n)) if n > 1 else 0.0

    def run(bounds):
        idx, start, stop = bounds
        return _exchangeable_max(n, epsilon, stop - start, seed, idx)

    maxima = np.concatenate(_rng.parallel_map(run, _rng.chunk_bounds(replicas, chunk), threads))
    k = int(np.count_nonzero(maxima <= u))
    return MaxComparison(n, epsilon, delta, u, k / replicas, wilson_interval(k, replicas), float(np.median(maxima)))


class NormalApproxReport(NamedTuple):
    sup_distance: float
    hybrid_max: np.ndarray
    gaussian_max: np.ndarray


def normal_approx_experiment(
    sample: RmfSample,
    grid: XGrid,
    X: float,
    replicas: int,
    seed: int,
    table: PrimeTable,
    threads: int = 1,
) -> NormalApproxReport:
    """Sup distance between the CDFs of max_x Re Z_x (large primes redrawn) and of a matched Gaussian max.

    The sup is taken over the pooled sample points, where both empirical
    CDFs jump, so it is exact for the two samples.
    """
    pts = grid.points
    Z = hybrid_large_prime_sums(sample, pts, X, table, replicas, seed, threads=threads)
    hyb = Z.real.max(axis=1)
    cov = covariance_matrix(sample, grid, X, table)
    gauss = sample_gaussian_vector(cov, replicas, _rng.derive_seed(seed, -1)).max(axis=1)
    if np.all(hyb == hyb[0]) and np.all(gauss == hyb[0]):
        return NormalApproxReport(0.0, hyb, gauss)
    d = float(stats.ks_2samp(hyb, gauss).statistic)
    return NormalApproxReport(d, hyb, gauss)


# ---------------------------------------------------------------- Perron integrals


def perron_step(X: float) -> float:
    return 1.0 / (20 * math.log(X)) if X > math.e else 0.05


def perron_nodes(T: float, step: float) -> tuple[np.ndarray, float]:
    """Midpoint nodes on [-T, T] and their common weight."""
    n = max(1, math.ceil(2 * T / step))
    h = 2 * T / n
    return -T + (np.arange(n) + 0.5) * h, h


def near_integer(y: float, X: float) -> bool:
    return abs(y - round(y)) <= X**-0.5


def _log_F(sample: RmfSample, v: np.ndarray, X: float, table: PrimeTable) -> np.ndarray:
    if X < 2:
        return np.zeros(v.size, dtype=np.complex128)
    # evaluate_grid sorts its nodes; ours are already increasing and distinct
    return evaluate_grid(sample, 0.0, v, [0], X, table).row(0)


def perron_partial_sum(
    sample: RmfSample,
    x: float,
    p: int,
    X: float,
    T: float,
    table: PrimeTable,
    step: float | None = None,
) -> complex:
    """Truncated Perron value of sum_{m <= x/p, m X-smooth} f(m) on the line Re s = 1/2.

    (1/2pi) (x/p)^(1/2) int_{-T}^{T} F(1/2+iv) (x/p)^(iv) / (1/2+iv) dv by the
    midpoint rule. Warns with NearIntegerWarning when x/p is within X^(-1/2)
    of an integer.
    """
    if X >= 2 and T > X**0.75 * (1 + 1e-12):
        raise PreconditionError("need T <= X^(3/4)")
    y = x / p
    if near_integer(y, max(X, 1.0)):
        warnings.warn(NearIntegerWarning(f"x/p = {y} is within X^-1/2 of an integer"), stacklevel=2)
    if step is None:
        step = perron_step(X)
        if y > 1:
            step = min(step, 1.0 / (20 * math.log(y)))
    v, h = perron_nodes(T, step)
    logF = _log_F(sample, v, X, table)
    s = 0.5 + 1j * v
    vals = np.exp(logF + s * math.log(y)) / s
    return complex(np.sum(vals) * h / (2 * math.pi))


@dataclass(frozen=True)
class FullRectangle:
    """|v|, |t| <= T."""

    T: float


@dataclass(frozen=True)
class DeltaRegion:
    """lo <= |v|, |t| <= hi with |v - t| <= width."""

    lo: float
    hi: float
    width: float

    @classmethod
    def for_X(cls, X: float) -> "DeltaRegion":
        ll = loglog(X)
        hi = ll**2
        width = min(math.exp(100 * math.log(ll) - math.log(math.log(X))), 2 * hi)
        return cls(ll**-2, hi, width)

    def __post_init__(self):
        if not 0 <= self.lo < self.hi or self.width <= 0:
            raise PreconditionError("empty region")


def _perron_weights(point: float, v: np.ndarray, h: float, logF: np.ndarray, mask: np.ndarray) -> np.ndarray:
    s = 0.5 + 1j * v
    g = np.exp(logF + 1j * v * math.log(point)) / s * h
    return np.where(mask, g, 0)


def _kernel_range(X: float) -> tuple[float, float]:
    return X, X**UPPER_EXP


def direct_covariance_sum(sample: RmfSample, x: float, y: float, X: float, table: PrimeTable) -> complex:
    """(1/sqrt(xy)) sum_{X<p<=X^(4/3)} S(x/p) conj(S(y/p)), the quantity the Perron integral approximates."""
    lo, hi = _kernel_range(X)
    a, _ = inner_sums(sample, [x, y], X, table, p_max=hi)
    prod = a[0] * np.conj(a[1])
    return complex(math.fsum(prod.real), math.fsum(prod.imag)) / math.sqrt(x * y)


def _banded(G: np.ndarray, H: np.ndarray, h: float, width: float, X: float, table: PrimeTable) -> complex:
    """sum_{i,k : |v_i - v_k| <= width} G_i conj(H_k) K(v_i - v_k) on a uniform lattice of spacing h."""
    n = G.size
    size = 1 << int(math.ceil(math.log2(2 * n)))
    # c[d] = sum_i G_i conj(H_{i-d})
    c = np.fft.ifft(np.fft.fft(G, size) * np.conj(np.fft.fft(H, size)))
    lags = np.arange(-(n - 1), n)
    c = c[lags % size]
    keep = np.abs(lags * h) <= width * (1 + 1e-12)
    lo, hi = _kernel_range(X)
    K = prime_kernel(table, lo, hi, lags[keep] * h)
    return complex(np.sum(c[keep] * K))


def perron_covariance(
    sample: RmfSample,
    x: float,
    y: float,
    X: float,
    region: FullRectangle | DeltaRegion,
    barriers: bool,
    table: PrimeTable,
    step: float | None = None,
    config: BarrierConfig | None = None,
    separable: bool | None = None,
) -> complex:
    """(1/4pi^2) double integral of G_x(v) conj(G_y(t)) K(v - t) over the region.

    G_x(v) = F(1/2+iv) x^(iv) / (1/2+iv) and K(h) = sum_{X<p<=X^(4/3)} p^(-1-ih).
    Integrals use the midpoint rule with step 1/(20 log X). The full rectangle
    factorises through the primes; a Delta region is summed by lag, using an
    FFT correlation for the lag sums. Barriers multiply G by the indicator of
    the A-event at each node.
    """
    step = perron_step(X) if step is None else step
    if step > 1.0 / math.log(X):
        raise PreconditionError("step too coarse to resolve the integrand")
    T = region.T if isinstance(region, FullRectangle) else region.hi
    v, h = perron_nodes(T, step)
    if barriers:
        config = config or BarrierConfig(X)
        grid = evaluate_grid(sample, 0.0, v, net_levels(math.log(X)), X, table)
        logF = grid.row(0)
        mask = barrier_A_mask(grid, config)
    else:
        logF = _log_F(sample, v, X, table)
        mask = np.ones(v.size, dtype=bool)
    if isinstance(region, DeltaRegion):
        mask = mask & (np.abs(v) >= region.lo)
    G = _perron_weights(x, v, h, logF, mask)
    H = _perron_weights(y, v, h, logF, mask)
    if separable is None:
        separable = isinstance(region, FullRectangle)
    if separable:
        if isinstance(region, DeltaRegion) and region.width < 2 * T:
            raise PreconditionError("separable route needs the full diagonal width")
        lo, hi = _kernel_range(X)
        primes = table.primes_in(lo, hi).astype(float)
        E = np.exp(-1j * np.outer(np.log(primes), v))  # primes x nodes
        Ax, Ay = E @ G, E @ H
        total = np.sum(Ax * np.conj(Ay) / primes)
    else:
        width = region.width if isinstance(region, DeltaRegion) else 2 * T
        total = _banded(G, H, h, width, X, table)
    return complex(total) / (4 * math.pi**2)


# ---------------------------------------------------------------- surveys


@dataclass(frozen=True)
class CovarianceSurvey:
    x_anchor: float
    threshold: float
    exceeders: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.exceeders)


def survey_threshold(X: float) -> float:
    return loglog(X) ** -0.6


def normalized_covariances(sample: RmfSample, grid: XGrid, X: float, table: PrimeTable) -> np.ndarray:
    """Matrix C[i, j] = (1/sqrt(x_i x_j)) sum_{X<p<=X^(4/3)} S(x_i/p) conj(S(x_j/p))."""
    pts = grid.points
    a, _ = inner_sums(sample, pts, X, table, p_max=max(X**UPPER_EXP, float(pts.max())))
    n = pts.size
    C = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            prod = a[i] * np.conj(a[j])
            C[i, j] = complex(math.fsum(prod.real), math.fsum(prod.imag))
    return C / np.sqrt(np.outer(pts, pts))


@dataclass(frozen=True, eq=False)
class SurveyResult:
    anchors: tuple[CovarianceSurvey, ...]
    values: np.ndarray = field(repr=False)

    @property
    def max_count(self) -> int:
        return max(s.count for s in self.anchors)


def covariance_survey(sample: RmfSample, grid: XGrid, X: float, table: PrimeTable, threshold: float | None = None) -> SurveyResult:
    """For each anchor x, the grid points y with |C(x, y)| >= threshold (default (loglog X)^-0.6)."""
    threshold = survey_threshold(X) if threshold is None else float(threshold)
    C = normalized_covariances(sample, grid, X, table)
    pts = grid.points
    mags = np.abs(C)
    anchors = tuple(
        CovarianceSurvey(float(pts[i]), threshold, tuple(float(pts[j]) for j in range(pts.size) if mags[i, j] >= threshold))
        for i in range(pts.size)
    )
    return SurveyResult(anchors, C)


def default_moment_order(X: float) -> int:
    ll = loglog(X)
    lll = math.log(ll) if ll > 1 else -math.inf
    if lll <= 0:
        return 0
    return int(math.floor(ll / (4000 * lll)))


def _exp_or_inf(v: float) -> float:
    return math.inf if v > 709 else math.exp(v)


def high_moment_bound(sample: RmfSample, X: float, k: int, C: float, table: PrimeTable, step: float | None = None) -> float:
    """Right-hand side of the 2k-th moment bound with the absolute constant C supplied."""
    logX = math.log(X)
    ll = loglog(X)
    lll = math.log(ll)
    Nmax = int(math.floor(ll**2 + 1))
    step = perron_step(X) if step is None else step
    first = 0.0
    for N in range(-Nmax, Nmax + 1):
        I = chaos_integral(sample, 0.0, N, N + 1, X, table, step=step)
        first += (C * abs(lll) / logX * I) ** (2 * k) / (N * N + 1)
    first /= logX ** (1 / 3)
    if k == 0:
        second, third = logX ** (-1 / 3), 1.0
    else:
        # (k^29 (loglog X)^17)^(2k) and (k^29 / (loglog X)^989)^(2k), formed in log space
        log_k, log_ll = math.log(k), math.log(ll)
        second = _exp_or_inf(2 * k * (29 * log_k + 17 * log_ll) - math.log(logX) / 3)
        third = _exp_or_inf(2 * k * (29 * log_k - 989 * log_ll))
    return logX * (first + second + third)


class HighMomentResult(NamedTuple):
    statistic: float
    bound: float
    k: int
    integrals: np.ndarray


def high_moment_survey(
    sample: RmfSample,
    grid: XGrid,
    X: float,
    k: int,
    barriers: bool,
    table: PrimeTable,
    C: float = 1.0,
    step: float | None = None,
) -> HighMomentResult:
    """max_x sum_y |double integral over Delta|^(2k), without the 1/(4 pi^2) normalisation."""
    if k < 0:
        raise PreconditionError("k must be nonnegative")
    region = DeltaRegion.for_X(X)
    pts = grid.points
    n = pts.size
    I = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            I[i, j] = 4 * math.pi**2 * perron_covariance(sample, pts[i], pts[j], X, region, barriers, table, step=step)
    stat = float(np.max(np.sum(np.abs(I) ** (2 * k), axis=1))) if k > 0 else float(n)
    return HighMomentResult(stat, high_moment_bound(sample, X, k, C, table, step), k, I)
