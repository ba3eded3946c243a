"""Exhaustive search over schedules on a volume grid (a testing oracle).

Grid levels are storage-side energies: buying level ``v`` puts ``v / eta``
on the market and selling it puts ``eta * v`` there, so a full round trip
of ``min(kappa, xi)`` is on the grid whenever that size is.
"""

from __future__ import annotations

import itertools

import numpy as np

from bessbench._validation import FEAS_TOL, check_vector
from bessbench.core import BatteryConfig, BidSchedule, RiskSpec, ScenarioEnsemble, validate_bid_schedule
from bessbench.optimize.milp import MilpSolution
from bessbench.optimize.risk import risk_measure_rows

MAX_CANDIDATES = 10_000_000
_CHUNK = 20_000


def _actions(levels: np.ndarray) -> np.ndarray:
    """Per-hour storage changes: no action, then each buy level, then each sell level."""
    return np.concatenate([[0.0], levels, -levels])


def brute_force_optimize(forecast: ScenarioEnsemble, config: BatteryConfig, risk: RiskSpec,
                         volume_grid) -> MilpSolution:
    """Best schedule on ``volume_grid`` by full enumeration.

    Ties within ``1e-12`` are resolved towards the earliest buy hour, then
    the earliest sell hour, then smaller volumes.

    Raises
    ------
    ValueError
        If the grid is not non-negative or the enumeration would exceed
        ``MAX_CANDIDATES`` schedules.
    """
    grid = check_vector(volume_grid, "volume_grid")
    if np.any(grid < 0):
        raise ValueError("volume_grid must be non-negative")
    levels = np.unique(grid[grid > 0])
    k = forecast.hours
    actions = _actions(levels)
    total = len(actions) ** k
    if total > MAX_CANDIDATES:
        raise ValueError(f"enumeration budget exceeded: {total} candidates > {MAX_CANDIDATES}")
    eta = config.eta
    paths = forecast.paths
    best_val, best_keys, best_rows = 0.0, [], []
    codes_iter = itertools.product(range(len(actions)), repeat=k)
    while True:
        chunk = np.array(list(itertools.islice(codes_iter, _CHUNK)), dtype=np.int64)
        if chunk.size == 0:
            break
        delta = actions[chunk]
        level = np.cumsum(delta, axis=1)
        buy = np.clip(delta, 0.0, None)
        sell = np.clip(-delta, 0.0, None)
        ok = (level.min(axis=1) >= -FEAS_TOL) & (level.max(axis=1) <= config.kappa + FEAS_TOL)
        ok &= np.abs(level[:, -1]) <= FEAS_TOL
        ok &= (buy > 0).sum(axis=1) <= config.n_buy
        ok &= (sell > 0).sum(axis=1) <= config.n_sell
        ok &= buy.sum(axis=1) <= config.cycles * config.kappa + FEAS_TOL
        ok &= (buy.max(axis=1) <= config.xi + FEAS_TOL) & (sell.max(axis=1) <= config.xi + FEAS_TOL)
        if not ok.any():
            continue
        buy, sell = buy[ok] / eta, sell[ok] * eta
        net = -buy / eta + sell * eta
        vals = risk_measure_rows(net @ paths.T, risk)
        top = vals.max()
        if top < best_val - 1e-12:
            continue
        if top > best_val + 1e-12:
            best_val, best_keys, best_rows = top, [], []
        for i in np.flatnonzero(vals >= best_val - 1e-12):
            best_keys.append(_key(buy[i], sell[i]))
            best_rows.append((buy[i], sell[i]))
    if best_val <= 0 or not best_rows:
        return MilpSolution(BidSchedule.zeros(k), 0.0, "optimal", 0.0)
    b, s = best_rows[min(range(len(best_keys)), key=best_keys.__getitem__)]
    schedule = BidSchedule(b, s)
    report = validate_bid_schedule(schedule, config)
    if not report.ok:
        raise RuntimeError(f"grid schedule failed validation: {report.violations}")
    return MilpSolution(schedule, float(best_val), "optimal", 0.0)


def _key(buy: np.ndarray, sell: np.ndarray) -> tuple:
    return (tuple(np.flatnonzero(buy)), tuple(np.flatnonzero(sell)), tuple(buy[buy > 0]), tuple(sell[sell > 0]))
