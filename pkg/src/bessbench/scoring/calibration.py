"""Marginal calibration of quantile forecasts and the joint (VaR, CVaR) score."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from bessbench._validation import check_probability
from bessbench.core import PriceDay, QuantileForecast


@dataclass(frozen=True, eq=False)
class MarginalCalibration:
    """Per-level ``MC = level - frequency(y < Q_level)`` pooled over days and hours."""

    levels: np.ndarray
    frequency: np.ndarray
    mc: np.ndarray
    count: int

    def rows(self) -> list[tuple[float, float, float]]:
        """Calibration-curve table ``(level, frequency, mc)``."""
        return [(float(a), float(f), float(c)) for a, f, c in zip(self.levels, self.frequency, self.mc)]


def marginal_calibration(forecasts, days, levels) -> MarginalCalibration:
    """Pool ``1{y < Q_level}`` over all days and hours.

    Parameters
    ----------
    forecasts : sequence of QuantileForecast
    days : sequence of PriceDay or price vectors, aligned with ``forecasts``
    levels : quantile levels inside each forecast's level range
    """
    forecasts, days = list(forecasts), list(days)
    if len(forecasts) != len(days) or not forecasts:
        raise ValueError("need the same non-zero number of forecasts and days")
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    hits = np.zeros(levels.size)
    count = 0
    for fc, day in zip(forecasts, days):
        if not isinstance(fc, QuantileForecast):
            raise ValueError("forecasts must be QuantileForecast objects")
        y = day.prices if isinstance(day, PriceDay) else np.asarray(day, dtype=float)
        if y.shape != (fc.hours,):
            raise ValueError(f"observation shape {y.shape} does not match {fc.hours} forecast hours")
        for i, lev in enumerate(levels):
            hits[i] += np.count_nonzero(y < fc.quantile(lev))
        count += y.size
    freq = hits / count
    return MarginalCalibration(levels, freq, levels - freq, count)


def pinball_and_joint_var_cvar(v: float, e: float, y: float, alpha: float) -> dict[str, float]:
    """Pinball loss of ``v`` and the Fissler-Ziegel joint score of ``(v, e)``.

    ``alpha`` is the lower-tail probability (``1 - RiskSpec.alpha``), and
    the score uses ``G1(v) = v``, ``G2(e) = exp(e) / (1 + exp(e))`` and
    ``log(1 + exp(e))`` as the antiderivative of ``G2``.  Lower is better.

    Raises
    ------
    ValueError
        For non-finite inputs, ``e > v`` or ``alpha`` outside (0, 1).
    """
    alpha = check_probability(alpha, "alpha")
    v, e, y = float(v), float(e), float(y)
    if not all(math.isfinite(t) for t in (v, e, y)):
        raise ValueError("v, e and y must be finite")
    if e > v + 1e-12 * max(1.0, abs(v)):
        raise ValueError(f"CVaR forecast {e} exceeds VaR forecast {v}")
    hit = 1.0 if y <= v else 0.0
    pinball = (hit - alpha) * (v - y)
    g2 = float(expit(e))
    joint = pinball + g2 * hit * (v - y) / alpha + g2 * (e - v) - float(np.logaddexp(0.0, e))
    return {"pinball": pinball, "joint": joint}


def joint_var_cvar_scores(v, e, y, alpha: float) -> np.ndarray:
    """Vectorized joint score over aligned arrays (same formula as above)."""
    alpha = check_probability(alpha, "alpha")
    v, e, y = (np.asarray(a, dtype=float) for a in (v, e, y))
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(e)) and np.all(np.isfinite(y))):
        raise ValueError("v, e and y must be finite")
    if np.any(e > v + 1e-12 * np.maximum(1.0, np.abs(v))):
        raise ValueError("a CVaR forecast exceeds its VaR forecast")
    hit = (y <= v).astype(float)
    g2 = expit(e)
    return (hit - alpha) * (v - y) + g2 * hit * (v - y) / alpha + g2 * (e - v) - np.logaddexp(0.0, e)
