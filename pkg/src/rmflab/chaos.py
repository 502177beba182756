"""Coarse nets, barrier events and multiplicative chaos integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _rng
from ._stats import wilson_interval
from .errors import PreconditionError
from .primes import PrimeTable
from .products import EulerGrid, evaluate_grid
from .rmf import ModelKind, RmfSample, sample_model


def net_levels(logX: float) -> list[int]:
    """Integer levels 0 <= j <= floor(loglog X) - 1."""
    return list(range(0, max(0, int(math.floor(math.log(logX))))))


def lattice_spacing(logX: float, j: int) -> float:
    L = logX / math.exp(j)
    return 1.0 / (L * math.log(L))


def _floor_to_lattice(u: float, d: float) -> float:
    n = math.floor(u / d)
    # repair rounding so that n*d <= u < (n+1)*d
    while n * d > u:
        n -= 1
    while (n + 1) * d <= u:
        n += 1
    return n * d


@dataclass(frozen=True)
class CoarseNet:
    """t(-1) = t and t(j) = largest lattice point <= t(j-1) at spacing 1/(L_j log L_j), L_j = log X / e^j."""

    t: float
    logX: float
    approximations: tuple[float, ...]
    truncated: bool = False

    def at(self, j: int) -> float:
        return self.approximations[j + 1]

    @property
    def levels(self) -> list[int]:
        return list(range(len(self.approximations) - 1))


def coarse_net(t: float, logX: float, max_level: int | None = None) -> CoarseNet:
    if logX <= math.e:
        raise PreconditionError("need log X > e")
    top = net_levels(logX)[-1] if max_level is None else int(max_level)
    approx = [float(t)]
    truncated = False
    for j in range(0, top + 1):
        L = logX / math.exp(j)
        if L <= 1 or math.log(L) <= 0:
            truncated = True
            break
        approx.append(_floor_to_lattice(approx[-1], lattice_spacing(logX, j)))
    return CoarseNet(float(t), float(logX), tuple(approx), truncated)


@dataclass(frozen=True)
class BarrierConfig:
    """Envelope constants for the barrier events; bounds are handled in log space."""

    X: float
    W: float = 0.0
    d_power: float = 5.0
    a_small_power: float = 1000.0
    a_large_power: float = 6.0
    a_fraction: float = 0.99

    @property
    def logX(self) -> float:
        return math.log(self.X)

    @property
    def loglogX(self) -> float:
        return math.log(self.logX)

    def _base(self, j: int) -> float:
        return math.log(self.logX) - j

    def _pow(self, power: float) -> float:
        return power * math.log(self.loglogX) if power != 0 else 0.0

    def log_d_bound(self, j: int) -> float:
        return self._base(j) + self._pow(self.d_power)

    def log_a_strong(self, j: int) -> float:
        return self._base(j) - self._pow(self.a_small_power)

    def log_a_weak(self, j: int) -> float:
        return self._base(j) + self._pow(self.a_large_power)

    def log_chaos1_bound(self, j: int) -> float:
        gap = self.loglogX - j
        return self._base(j) + 2 * math.log(gap) + self.W if gap > 0 else -math.inf


def barrier_D(grid: EulerGrid, net: CoarseNet, config: BarrierConfig) -> bool:
    """|F_j(1/2 + i t(j))| <= (log X / e^j) (loglog X)^d_power for every net level."""
    return all(grid.log_abs(j, net.at(j)) <= config.log_d_bound(j) for j in net.levels)


def barrier_chaos1(grid: EulerGrid, net: CoarseNet, config: BarrierConfig) -> bool:
    """The weaker envelope (log X / e^j)(loglog X - j)^2 e^W at the net points."""
    return all(grid.log_abs(j, net.at(j)) <= config.log_chaos1_bound(j) for j in net.levels)


def barrier_A(grid: EulerGrid, t: float, config: BarrierConfig) -> bool:
    """Strong envelope on small levels and weak envelope on every level in the grid, at t itself."""
    i = grid.index_of(t)
    cut = config.a_fraction * config.loglogX
    for j in grid.levels:
        la = float(grid.row(j)[i].real)
        if la > config.log_a_weak(j):
            return False
        if j <= cut and la > config.log_a_strong(j):
            return False
    return True


def barrier_A_mask(grid: EulerGrid, config: BarrierConfig) -> np.ndarray:
    """barrier_A evaluated at every grid point."""
    ok = np.ones(grid.t_grid.size, dtype=bool)
    cut = config.a_fraction * config.loglogX
    for j in grid.levels:
        la = grid.row(j).real
        ok &= la <= config.log_a_weak(j)
        if j <= cut:
            ok &= la <= config.log_a_strong(j)
    return ok


def net_grid(sample: RmfSample, ts: Sequence[float], X: float, table: PrimeTable, sigma: float = 0.0) -> tuple[EulerGrid, list[CoarseNet]]:
    """Grid holding every t and all its net points, at levels 0..floor(loglog X)-1."""
    logX = math.log(X)
    nets = [coarse_net(t, logX) for t in ts]
    points = sorted({u for n in nets for u in n.approximations})
    grid = evaluate_grid(sample, sigma, points, net_levels(logX), X, table)
    return grid, nets


def level0_lattice(logX: float, lo: float, hi: float) -> np.ndarray:
    """Every value t(0) can take for t in [lo, hi]."""
    d = lattice_spacing(logX, 0)
    first = math.floor(_floor_to_lattice(lo, d) / d + 0.5)
    last = math.floor(_floor_to_lattice(hi, d) / d + 0.5)
    return np.arange(first, last + 1) * d


def quadrature_nodes(t0: float, t1: float, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite Simpson nodes and weights on [t0, t1] with spacing <= step."""
    n = max(2, 2 * math.ceil((t1 - t0) / (2 * step)))
    t = np.linspace(t0, t1, n + 1)
    h = (t1 - t0) / n
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return t, w * h / 3


def default_step(X: float) -> float:
    return 1.0 / (20 * math.log(X)) if X > math.e else 0.05


def chaos_integral(
    sample: RmfSample,
    sigma: float,
    t0: float,
    t1: float,
    X: float,
    table: PrimeTable,
    step: float | None = None,
) -> float:
    """Simpson-rule value of int_{t0}^{t1} |F(1/2 + sigma + it)|^2 dt."""
    if t1 < t0:
        raise PreconditionError("need t0 <= t1")
    if t1 == t0:
        return 0.0
    if X < 2:
        return t1 - t0
    step = default_step(X) if step is None else step
    if step > 1.0 / math.log(X):
        raise PreconditionError(f"step {step} too coarse for X={X}; need <= 1/log X")
    t, w = quadrature_nodes(t0, t1, step)
    grid = evaluate_grid(sample, sigma, t, [0], X, table)
    return float(np.dot(w, np.exp(2 * grid.row(0).real)))


class ChaosProbe(NamedTuple):
    Ws: tuple[float, ...]
    thresholds: tuple[float, ...]
    probabilities: tuple[float, ...]
    intervals: tuple[tuple[float, float], ...]
    integrals: np.ndarray


def chaos_lower_threshold(X: float, W: float, sigma: float) -> float:
    scale = math.log(X) if sigma == 0 else min(math.log(X), 1 / abs(sigma))
    return math.exp(-2.1 * W) * scale / math.sqrt(math.log(math.log(X)))


def probe_chaos_lower(
    kind: ModelKind | str,
    X: float,
    Ws: Sequence[float],
    sigma: float,
    replicas: int,
    master_seed: int,
    table: PrimeTable,
    threads: int = 1,
    enforce_range: bool = False,
) -> ChaosProbe:
    """Empirical P(int_{1/3}^{1/2} |F|^2 >= e^(-2.1W) min(log X, 1/|sigma|)/sqrt(loglog X)).

    One integral per replica is shared by every W, so the estimates are
    coupled and nested across W.
    """
    kind = ModelKind.parse(kind)
    if enforce_range:
        top = math.log(math.log(X)) ** 0.01
        if any(not 1 <= W <= top for W in Ws):
            raise PreconditionError("W outside [1, (loglog X)^(1/100)]")
    limit = int(X)

    def one(r: int) -> float:
        s = sample_model(kind, _rng.derive_seed(master_seed, r), limit, table)
        return chaos_integral(s, sigma, 1 / 3, 1 / 2, X, table)

    vals = np.array(_rng.parallel_map(one, range(replicas), threads))
    ths, probs, cis = [], [], []
    for W in Ws:
        th = chaos_lower_threshold(X, W, sigma)
        k = int(np.count_nonzero(vals >= th))
        ths.append(th)
        probs.append(k / replicas)
        cis.append(wilson_interval(k, replicas))
    return ChaosProbe(tuple(Ws), tuple(ths), tuple(probs), tuple(cis), vals)


def chaos_moment_probe(
    kind: ModelKind | str,
    X: float,
    qs: Sequence[float],
    replicas: int,
    master_seed: int,
    table: PrimeTable,
    threads: int = 1,
) -> dict[float, float]:
    """E (int_{-1/2}^{1/2} |F(1/2+it)|^2 dt)^q divided by (log X / (1 + (1-q) sqrt(loglog X)))^q."""
    kind = ModelKind.parse(kind)

    def one(r: int) -> float:
        s = sample_model(kind, _rng.derive_seed(master_seed, r), int(X), table)
        return chaos_integral(s, 0.0, -0.5, 0.5, X, table)

    vals = np.array(_rng.parallel_map(one, range(replicas), threads))
    ll = math.log(math.log(X))
    return {q: float(np.mean(vals**q) / (math.log(X) / (1 + (1 - q) * math.sqrt(ll))) ** q) for q in qs}


class BarrierProbe(NamedTuple):
    probability: float
    interval: tuple[float, float]


def probe_barrier_D(
    kind: ModelKind | str,
    X: float,
    replicas: int,
    master_seed: int,
    table: PrimeTable,
    config: BarrierConfig | None = None,
    half_width: float = 0.5,
    threads: int = 1,
) -> BarrierProbe:
    """Fraction of samples for which the D-event holds at every net with |t| <= half_width."""
    kind = ModelKind.parse(kind)
    config = config or BarrierConfig(X)
    ts = level0_lattice(math.log(X), -half_width, half_width)

    def one(r: int) -> bool:
        s = sample_model(kind, _rng.derive_seed(master_seed, r), int(X), table)
        grid, nets = net_grid(s, ts, X, table)
        return all(barrier_D(grid, n, config) for n in nets)

    hits = sum(_rng.parallel_map(one, range(replicas), threads))
    return BarrierProbe(hits / replicas, wilson_interval(hits, replicas))


def probe_barrier_A_weighted(
    kind: ModelKind | str,
    X: float,
    t: float,
    replicas: int,
    master_seed: int,
    table: PrimeTable,
    config: BarrierConfig | None = None,
    threads: int = 1,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of |F(1/2+it)|^2 1_D(t) 1_{A(t) fails}."""
    kind = ModelKind.parse(kind)
    config = config or BarrierConfig(X)

    def one(r: int) -> float:
        s = sample_model(kind, _rng.derive_seed(master_seed, r), int(X), table)
        grid, (net,) = net_grid(s, [t], X, table)
        if barrier_D(grid, net, config) and not barrier_A(grid, t, config):
            return math.exp(2 * grid.log_abs(0, t))
        return 0.0

    vals = np.array(_rng.parallel_map(one, range(replicas), threads))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replicas))


@dataclass(frozen=True)
class WalkSpec:
    """Gaussian walk with J steps of variance ``step_variance``; barrier a above, floor b below the endpoint."""

    J: int
    a: float
    b: float
    step_variance: float = 0.5

    def __post_init__(self):
        if self.J < 1 or self.step_variance <= 0:
            raise PreconditionError("need J >= 1 and positive step variance")


def ballot_walk_probability(
    spec: WalkSpec,
    replicas: int,
    master_seed: int,
    chunk: int = 1 << 15,
    threads: int = 1,
) -> tuple[float, float]:
    """Monte Carlo P(max_k S_k <= a and S_J >= -b) with its standard error."""
    if replicas < 100:
        raise PreconditionError("need at least 100 replicas")
    sd = math.sqrt(spec.step_variance)

    def run(bounds) -> int:
        idx, start, stop = bounds
        g = _rng.generator(master_seed, idx)
        S = np.cumsum(g.normal(0.0, sd, size=(stop - start, spec.J)), axis=1)
        return int(np.count_nonzero((S.max(axis=1) <= spec.a) & (S[:, -1] >= -spec.b)))

    hits = sum(_rng.parallel_map(run, _rng.chunk_bounds(replicas, chunk), threads))
    p = hits / replicas
    return p, math.sqrt(p * (1 - p) / replicas)
