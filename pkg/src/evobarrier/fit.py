"""Least-squares slope fitting, mostly on log-log grids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    halfwidth95: float
    npoints: int


def fit_slope(x, y) -> SlopeFit:
    """Ordinary least-squares line fit with a normal-approximation 95% half-width."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = x.size
    if m < 2:
        raise NumericalError("slope fit needs at least 2 points")
    xm = x.mean()
    ym = y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0.0:
        raise NumericalError("slope fit abscissa is degenerate")
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    var = float((resid**2).sum() / (m - 2)) if m > 2 else 0.0
    stderr = math.sqrt(var / sxx)
    return SlopeFit(slope, intercept, stderr, 1.96 * stderr, m)


def fit_loglog(x, y, min_points: int = 3) -> SlopeFit:
    """Slope of log(y) against log(x); nonpositive or nonfinite samples are dropped."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if int(ok.sum()) < min_points:
        raise NumericalError(
            f"degenerate fit: fewer than {min_points} usable points"
        )
    return fit_slope(np.log(x[ok]), np.log(y[ok]))
