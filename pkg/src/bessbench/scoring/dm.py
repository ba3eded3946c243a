"""One-sided Diebold-Mariano comparison of two score series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from bessbench.core import ScoreSeries

H0_DIRECTIONS = ("greater", "less", "two-sided")


@dataclass(frozen=True)
class DMResult:
    """Test outcome; ``degenerate`` is set (and the numbers are NaN) when the
    loss differential has zero variance."""

    statistic: float
    p_value: float
    n: int
    lags: int
    degenerate: bool = False


def _long_run_variance(d: np.ndarray, lags: int) -> float:
    n = d.size
    dc = d - d.mean()
    var = float(dc @ dc) / n
    for lag in range(1, lags + 1):
        weight = 1.0 - lag / (lags + 1.0)
        var += 2.0 * weight * float(dc[lag:] @ dc[:-lag]) / n
    return var


def dm_test(series_a, series_b, h0_direction: str = "greater", lags: int = 0) -> DMResult:
    """Test the mean of ``d_t = a_t - b_t``.

    ``h0_direction="greater"`` tests H0: ``E[d] >= 0`` (``a`` no better
    than ``b`` for lower-is-better scores), so small p-values favour ``a``.
    ``"less"`` tests H0: ``E[d] <= 0``.  ``lags > 0`` switches to a
    Bartlett-weighted long-run variance.

    Parameters
    ----------
    series_a, series_b : ScoreSeries or array-like of equal length
    """
    if h0_direction not in H0_DIRECTIONS:
        raise ValueError(f"h0_direction must be one of {H0_DIRECTIONS}, got {h0_direction!r}")
    if lags < 0:
        raise ValueError("lags must be non-negative")
    a = series_a.values if isinstance(series_a, ScoreSeries) else np.asarray(series_a, dtype=float)
    b = series_b.values if isinstance(series_b, ScoreSeries) else np.asarray(series_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"series must be 1-D and of equal length, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise ValueError("need at least 2 paired observations")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("score series must be finite")
    d = a - b
    n = d.size
    var = _long_run_variance(d, min(lags, n - 1))
    if var <= 1e-15 * max(1.0, float(np.mean(d**2))):
        return DMResult(math.nan, math.nan, n, lags, degenerate=True)
    stat = float(d.mean() / math.sqrt(var / n))
    if h0_direction == "greater":
        p = float(norm.cdf(stat))
    elif h0_direction == "less":
        p = float(norm.sf(stat))
    else:
        p = float(2.0 * norm.sf(abs(stat)))
    return DMResult(stat, p, n, lags)
