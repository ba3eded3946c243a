"""Statistical and economic evaluation of probabilistic day-ahead price forecasts."""

from bessbench.core import (
    BatteryConfig,
    BidSchedule,
    GaussianPriceSpec,
    PriceDay,
    QuantileForecast,
    RiskSpec,
    ScenarioEnsemble,
    ScoreSeries,
    realized_return,
    validate_bid_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "BatteryConfig",
    "BidSchedule",
    "GaussianPriceSpec",
    "PriceDay",
    "QuantileForecast",
    "RiskSpec",
    "ScenarioEnsemble",
    "ScoreSeries",
    "realized_return",
    "validate_bid_schedule",
]
