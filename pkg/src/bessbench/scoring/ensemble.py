"""Scores for ensemble forecasts of one delivery day.

Every function takes the ensemble as an ``(M, hours)`` array or a
``ScenarioEnsemble`` and the realization as a vector or ``PriceDay``.
Lower is better throughout.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist

from bessbench._validation import check_matrix, check_vector
from bessbench.core import PriceDay, ScenarioEnsemble


def _paths(forecast) -> np.ndarray:
    if isinstance(forecast, ScenarioEnsemble):
        return forecast.paths
    return check_matrix(forecast, "forecast")


def _obs(day, hours: int) -> np.ndarray:
    y = day.prices if isinstance(day, PriceDay) else check_vector(day, "observation")
    if y.shape[0] != hours:
        raise ValueError(f"observation has {y.shape[0]} hours, forecast has {hours}")
    return y


def ensemble_quantiles(paths: np.ndarray, levels) -> np.ndarray:
    """Per-hour quantiles with midpoint plotting positions ``(i - 0.5) / M``.

    Returns an array of shape ``(len(levels), hours)``.  Levels below
    ``0.5 / M`` or above ``1 - 0.5 / M`` clamp to the extreme members.
    """
    paths = np.sort(np.asarray(paths, dtype=float), axis=0)
    m = paths.shape[0]
    pos = (np.arange(1, m + 1) - 0.5) / m
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    out = np.empty((levels.size, paths.shape[1]))
    for h in range(paths.shape[1]):
        out[:, h] = np.interp(levels, pos, paths[:, h])
    return out


def point_scores(forecast, day) -> dict[str, float]:
    """MAE of the per-hour median and RMSE of the per-hour mean."""
    f = _paths(forecast)
    y = _obs(day, f.shape[1])
    mae = float(np.mean(np.abs(np.median(f, axis=0) - y)))
    rmse = float(np.sqrt(np.mean((f.mean(axis=0) - y) ** 2)))
    return {"MAE": mae, "RMSE": rmse}


def _mean_abs_pairwise(x: np.ndarray) -> np.ndarray:
    """``(1/M^2) sum_mn |x_m - x_n|`` per column in O(M log M)."""
    m = x.shape[0]
    xs = np.sort(x, axis=0)
    weights = 2 * np.arange(1, m + 1) - m - 1
    return 2.0 * (weights @ xs) / m**2


def crps_per_hour(forecast, day) -> np.ndarray:
    """Energy-form CRPS for each hour."""
    f = _paths(forecast)
    if f.shape[0] < 2:
        raise ValueError("CRPS needs at least 2 ensemble members")
    y = _obs(day, f.shape[1])
    return np.mean(np.abs(f - y), axis=0) - 0.5 * _mean_abs_pairwise(f)


def crps(forecast, day) -> float:
    """Hour-averaged CRPS."""
    return float(np.mean(crps_per_hour(forecast, day)))


def energy_score(forecast, day) -> float:
    """Energy score with Euclidean norms over whole paths."""
    f = _paths(forecast)
    if f.shape[0] < 2:
        raise ValueError("energy score needs at least 2 ensemble members")
    y = _obs(day, f.shape[1])
    first = np.mean(np.linalg.norm(f - y, axis=1))
    m = f.shape[0]
    if f.shape[1] == 1:
        spread = _mean_abs_pairwise(f)[0]
    else:
        spread = 2.0 * np.sum(pdist(f)) / m**2
    return float(first - 0.5 * spread)


def variogram_score(forecast, day, p: float = 0.5) -> float:
    """Variogram score of order ``p``, scaled by ``1 / H**(1/p)``.

    ``H`` is the last hour index, i.e. ``hours - 1``.
    """
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    f = _paths(forecast)
    y = _obs(day, f.shape[1])
    obs_v = np.abs(y[:, None] - y[None, :]) ** p
    fc_v = np.mean(np.abs(f[:, :, None] - f[:, None, :]) ** p, axis=0)
    big_h = max(f.shape[1] - 1, 1)
    return float(np.sum((obs_v - fc_v) ** 2) / big_h ** (1.0 / p))


def dawid_sebastiani(forecast, day, return_info: bool = False):
    """Dawid-Sebastiani score from the ensemble mean and covariance.

    When ``M <= hours`` the sample covariance is singular; ``1e-8 * trace /
    hours`` is then added to its diagonal and the returned info dict has
    ``regularized=True``.
    """
    f = _paths(forecast)
    if f.shape[0] < 2:
        raise ValueError("Dawid-Sebastiani score needs at least 2 ensemble members")
    k = f.shape[1]
    y = _obs(day, k)
    if np.all(np.ptp(f, axis=0) == 0):
        raise ValueError("ensemble has no spread; Dawid-Sebastiani score undefined")
    mu = f.mean(axis=0)
    cov = np.atleast_2d(np.cov(f, rowvar=False))
    regularized = f.shape[0] <= k
    if regularized:
        cov = cov + np.eye(k) * 1e-8 * np.trace(cov) / k
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise ValueError("ensemble covariance is singular; Dawid-Sebastiani score undefined")
    r = y - mu
    score = float(r @ np.linalg.solve(cov, r) + logdet)
    if return_info:
        return score, {"regularized": regularized}
    return score


def mpd_mhd(point_path, day) -> dict[str, float]:
    """Hour and level deviation of the daily extremes of a point forecast.

    ``MPD = |max_hat - max| - |min_hat - min|`` is evaluated as printed, so
    it can be negative.
    """
    p_hat = check_vector(point_path, "point_path")
    y = _obs(day, p_hat.shape[0])
    mhd = abs(int(np.argmax(p_hat)) - int(np.argmax(y))) + abs(int(np.argmin(p_hat)) - int(np.argmin(y)))
    mpd = abs(p_hat.max() - y.max()) - abs(p_hat.min() - y.min())
    return {"MPD": float(mpd), "MHD": float(mhd)}
