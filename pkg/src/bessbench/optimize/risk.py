"""Empirical risk measures on return samples.

CVaR convention: with ``t = (1 - alpha) * n`` the lower tail holds the
``floor(t)`` smallest returns at full weight plus the next one at weight
``t - floor(t)``; CVaR is the weighted mean over mass ``t``.  For integer
``t`` this is the mean of the ``t`` smallest returns, and for any ``t`` it
equals the optimum of the Rockafellar-Uryasev LP used by the MILP.
VaR is the ``ceil(t)``-th smallest return.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog

from bessbench.core import RiskKind, RiskSpec


def tail_mass(n: int, alpha: float) -> float:
    t = (1.0 - alpha) * n
    r = round(t)
    return float(r) if abs(t - r) < 1e-9 else t


def _tail(sorted_returns: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """VaR and CVaR along the last axis of pre-sorted returns."""
    n = sorted_returns.shape[-1]
    t = tail_mass(n, alpha)
    full = int(math.floor(t))
    frac = t - full
    k = max(int(math.ceil(t)), 1)
    var = sorted_returns[..., k - 1]
    total = sorted_returns[..., :full].sum(axis=-1)
    if frac > 0:
        total = total + frac * sorted_returns[..., full]
    return var, total / t


def var_cvar(returns, alpha: float) -> tuple[float, float]:
    """``(VaR_alpha, CVaR_alpha)`` of an empirical return sample."""
    r = np.asarray(returns, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("risk measures need a non-empty sample")
    var, cvar = _tail(np.sort(r), alpha)
    return float(var), float(cvar)


def risk_measure(returns, spec: RiskSpec) -> float:
    """Expected profit (mean) or lower-tail CVaR of an empirical sample."""
    r = np.asarray(returns, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("risk measures need a non-empty sample")
    if spec.kind is RiskKind.EXPECTED_PROFIT:
        return float(r.mean())
    return var_cvar(r, spec.alpha)[1]


def risk_measure_rows(returns: np.ndarray, spec: RiskSpec) -> np.ndarray:
    """Row-wise risk measure of a ``(candidates, scenarios)`` matrix."""
    returns = np.asarray(returns, dtype=float)
    if returns.shape[-1] == 0:
        raise ValueError("risk measures need a non-empty sample")
    if spec.kind is RiskKind.EXPECTED_PROFIT:
        return returns.mean(axis=-1)
    return _tail(np.sort(returns, axis=-1), spec.alpha)[1]


def cvar_lp_value(returns, alpha: float) -> float:
    """CVaR of a fixed return sample through the Rockafellar-Uryasev LP.

    Maximizes ``zeta - sum(u) / ((1 - alpha) n)`` subject to
    ``u_m >= zeta - R_m`` and ``u_m >= 0``.  Used to check that the MILP
    linearization and :func:`var_cvar` agree.
    """
    r = np.asarray(returns, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("risk measures need a non-empty sample")
    n = r.size
    t = tail_mass(n, alpha)
    c = np.concatenate([[-1.0], np.full(n, 1.0 / t)])
    a_ub = np.hstack([np.ones((n, 1)), -np.eye(n)])
    bounds = [(None, None)] + [(0.0, None)] * n
    res = linprog(c, A_ub=a_ub, b_ub=r, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"CVaR LP failed: {res.message}")
    return float(-res.fun)
