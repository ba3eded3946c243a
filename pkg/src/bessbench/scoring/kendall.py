"""Association score built on Kendall's tau-b between daily price paths."""

from __future__ import annotations

import enum

import numpy as np

from bessbench._validation import check_matrix, check_vector
from bessbench.core import PriceDay, ScenarioEnsemble


class KendallMode(str, enum.Enum):
    """``AS_WRITTEN``: ``E tau(F, y) / 2 - E tau(F, F') - tau(y, y)``.
    ``KERNEL``: ``E tau(F, F') / 2 - E tau(F, y) + tau(y, y) / 2``, the
    kernel-score form, which is zero for a point mass on ``y``."""

    AS_WRITTEN = "as-written"
    KERNEL = "kernel"


def _pair_signs(x: np.ndarray) -> np.ndarray:
    i, j = np.triu_indices(x.shape[-1], 1)
    return np.sign(x[..., j] - x[..., i])


def kendall_tau_b(v, w) -> float:
    """Tie-adjusted Kendall correlation of two vectors."""
    sv, sw = _pair_signs(check_vector(v, "v")), _pair_signs(check_vector(w, "w"))
    if sv.shape != sw.shape:
        raise ValueError("vectors must have equal length")
    denom = np.sqrt(np.count_nonzero(sv) * np.count_nonzero(sw))
    if denom == 0:
        raise ValueError("Kendall's tau is undefined for a constant vector")
    return float(sv @ sw / denom)


def kendall_score(forecast, day, mode: KendallMode | str) -> float:
    """Kendall score of an ensemble; lower is better in kernel mode.

    ``E tau(F, F')`` averages over ordered member pairs with ``m != n``.

    Raises
    ------
    ValueError
        For fewer than 2 members or hours, or a constant member or
        observation (tau undefined).
    """
    mode = KendallMode(mode)
    f = forecast.paths if isinstance(forecast, ScenarioEnsemble) else check_matrix(forecast, "forecast")
    y = day.prices if isinstance(day, PriceDay) else check_vector(day, "observation")
    m, k = f.shape
    if m < 2 or k < 2:
        raise ValueError("Kendall score needs at least 2 members and 2 hours")
    if y.shape[0] != k:
        raise ValueError(f"observation has {y.shape[0]} hours, forecast has {k}")
    sf, sy = _pair_signs(f), _pair_signs(y)
    nf, ny = np.count_nonzero(sf, axis=1).astype(float), float(np.count_nonzero(sy))
    flat = np.flatnonzero(nf == 0)
    if flat.size:
        raise ValueError(f"ensemble member {int(flat[0])} is constant; Kendall's tau undefined")
    if ny == 0:
        where = f" on {day.date_tag}" if isinstance(day, PriceDay) and day.date_tag else ""
        raise ValueError(f"observation{where} is constant; Kendall's tau undefined")
    tau_fy = (sf @ sy) / np.sqrt(nf * ny)
    gram = (sf @ sf.T) / np.sqrt(np.outer(nf, nf))
    tau_ff = (gram.sum() - np.trace(gram)) / (m * (m - 1))
    if mode is KendallMode.AS_WRITTEN:
        return float(0.5 * tau_fy.mean() - tau_ff - 1.0)
    return float(0.5 * tau_ff - tau_fy.mean() + 0.5)
