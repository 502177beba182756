"""Small statistics helpers (confidence intervals, log-log fits)."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def mean_ci(samples: np.ndarray, z: float = Z95) -> tuple[float, float, float]:
    """(mean, lower, upper) normal-approximation interval."""
    samples = np.asarray(samples, dtype=float)
    m = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / math.sqrt(samples.size)) if samples.size > 1 else math.inf
    return m, m - z * se, m + z * se


class LogLogFit(NamedTuple):
    slope: float
    intercept: float
    residuals: tuple[float, ...]


def loglog_fit(x, y) -> LogLogFit:
    """Ordinary least squares of log y on log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return LogLogFit(float(coef[0]), float(coef[1]), tuple(float(r) for r in res))
