"""Enumeration over single buy/sell pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bessbench.core import BatteryConfig, BidSchedule, RiskSpec, ScenarioEnsemble
from bessbench.optimize.risk import risk_measure_rows


@dataclass(frozen=True, eq=False)
class PairValueTable:
    """Risk-measure value of every ``b < s`` pair; NaN where ``b >= s``."""

    values: np.ndarray
    no_action_value: float = 0.0

    def __getitem__(self, key):
        return self.values[key]


def pair_volumes(config: BatteryConfig) -> tuple[float, float]:
    """Market-side volumes of one full-size round trip (storage empty -> full -> empty)."""
    size = min(config.kappa, config.xi)
    return size / config.eta, config.eta * size


def pair_returns(paths: np.ndarray, config: BatteryConfig) -> np.ndarray:
    """Scenario returns of every pair, shape ``(hours, hours, M)``; only ``b < s`` is meaningful."""
    buy, sell = pair_volumes(config)
    eta = config.eta
    cost = (buy / eta) * paths.T
    gain = (sell * eta) * paths.T
    return gain[None, :, :] - cost[:, None, :]


def dp_optimize(forecast: ScenarioEnsemble, config: BatteryConfig, risk: RiskSpec) -> tuple[BidSchedule, PairValueTable, float]:
    """Best single round trip under ``risk``, or no action.

    Returns the schedule, the full pair table and the predicted objective.
    A pair is chosen only if its value is strictly positive; ties between
    pairs go to the earliest buy hour, then the earliest sell hour.
    """
    if config.n_buy != 1 or config.n_sell != 1:
        raise ValueError("dp_optimize covers single buy/sell pairs only; use milp_optimize for multiple bids")
    k = forecast.hours
    if k < 2:
        raise ValueError("need at least 2 hours")
    returns = pair_returns(forecast.paths, config)
    b_idx, s_idx = np.triu_indices(k, 1)
    vals = risk_measure_rows(returns[b_idx, s_idx], risk)
    table = np.full((k, k), np.nan)
    table[b_idx, s_idx] = vals
    best = int(np.argmax(vals))
    if vals[best] <= 0:
        return BidSchedule.zeros(k), PairValueTable(table), 0.0
    buy, sell = pair_volumes(config)
    sched = BidSchedule.pair(k, int(b_idx[best]), int(s_idx[best]), buy, sell)
    return sched, PairValueTable(table), float(vals[best])
