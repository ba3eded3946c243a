"""Domain types and the two primitives every other module builds on.

Volume convention
-----------------
``BidSchedule.buy[h]`` and ``BidSchedule.sell[h]`` are market-side volumes.
The storage sees ``eta * buy`` on charge and ``sell / eta`` on discharge, and
cash flows are ``-buy / eta * price`` and ``+sell * eta * price``.  With a
round-trip of ``buy = kappa / eta`` followed by ``sell = eta * kappa`` the
storage goes from empty to full and back to empty.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from bessbench._validation import (
    FEAS_TOL,
    check_matrix,
    check_positive,
    check_positive_int,
    check_probability,
    check_vector,
    is_psd,
)

DEFAULT_HOURS = 24


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PriceDay:
    """Realized prices of one delivery day (EUR/MWh, negatives allowed)."""

    prices: np.ndarray
    date_tag: Any = None

    def __post_init__(self):
        object.__setattr__(self, "prices", _frozen(check_vector(self.prices, "prices")))

    @property
    def hours(self) -> int:
        return self.prices.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PriceDay):
            return NotImplemented
        return self.date_tag == other.date_tag and np.array_equal(self.prices, other.prices)

    def __hash__(self):
        return hash((self.date_tag, self.prices.tobytes()))


@dataclass(frozen=True, eq=False)
class ScenarioEnsemble:
    """``M`` sampled price paths, shape ``(members, hours)``."""

    paths: np.ndarray
    date_tag: Any = None

    def __post_init__(self):
        object.__setattr__(self, "paths", _frozen(check_matrix(self.paths, "paths")))

    @property
    def members(self) -> int:
        return self.paths.shape[0]

    @property
    def hours(self) -> int:
        return self.paths.shape[1]

    def require_members(self, minimum: int, what: str) -> None:
        if self.members < minimum:
            raise ValueError(f"{what} needs at least {minimum} ensemble members, got {self.members}")

    def __eq__(self, other):
        if not isinstance(other, ScenarioEnsemble):
            return NotImplemented
        return self.date_tag == other.date_tag and np.array_equal(self.paths, other.paths)

    def __hash__(self):
        return hash((self.date_tag, self.paths.tobytes()))


@dataclass(frozen=True, eq=False)
class QuantileForecast:
    """Per-hour quantile predictions.

    Parameters
    ----------
    levels : array-like of shape (L,)
        Strictly increasing probabilities in (0, 1).
    values : array-like of shape (L, hours)
        ``values[i, h]`` is the predicted ``levels[i]``-quantile at hour ``h``.
    """

    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        levels = check_vector(self.levels, "levels")
        if np.any(levels <= 0) or np.any(levels >= 1):
            raise ValueError("quantile levels must lie in (0, 1)")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("quantile levels must be strictly increasing")
        values = check_matrix(self.values, "values", shape=(levels.shape[0], None))
        if np.any(np.diff(values, axis=0) < 0):
            lvl, hour = np.argwhere(np.diff(values, axis=0) < 0)[0]
            raise ValueError(f"quantile crossing at hour {hour} between levels {levels[lvl]} and {levels[lvl + 1]}")
        object.__setattr__(self, "levels", _frozen(levels))
        object.__setattr__(self, "values", _frozen(values))

    @property
    def hours(self) -> int:
        return self.values.shape[1]

    def quantile(self, level: float) -> np.ndarray:
        """Quantile path at ``level``, linear in probability between stored levels."""
        level = float(level)
        lo, hi = self.levels[0], self.levels[-1]
        if level < lo - 1e-12 or level > hi + 1e-12:
            raise ValueError(f"level {level} outside the stored range [{lo}, {hi}]; extrapolation is not supported")
        idx = np.searchsorted(self.levels, level)
        if idx < len(self.levels) and abs(self.levels[idx] - level) <= 1e-12:
            return self.values[idx].copy()
        if idx > 0 and abs(self.levels[idx - 1] - level) <= 1e-12:
            return self.values[idx - 1].copy()
        w = (level - self.levels[idx - 1]) / (self.levels[idx] - self.levels[idx - 1])
        return (1 - w) * self.values[idx - 1] + w * self.values[idx]

    @classmethod
    def from_ensemble(cls, ensemble: ScenarioEnsemble, levels) -> QuantileForecast:
        """Empirical quantiles on the ``(i - 0.5) / M`` plotting positions."""
        from bessbench.scoring.ensemble import ensemble_quantiles

        levels = np.asarray(levels, dtype=float)
        return cls(levels, ensemble_quantiles(ensemble.paths, levels))


@dataclass(frozen=True, eq=False)
class GaussianPriceSpec:
    """Multivariate normal prices ``N(mu, D sigma D)`` with ``D = dispersion_b * I``."""

    mu: np.ndarray
    sigma: np.ndarray
    dispersion_b: float = 1.0

    def __post_init__(self):
        mu = check_vector(self.mu, "mu")
        sigma = check_matrix(self.sigma, "sigma", shape=(mu.shape[0], mu.shape[0]))
        if not is_psd(sigma):
            raise ValueError("sigma must be symmetric positive semidefinite")
        check_positive(self.dispersion_b, "dispersion_b")
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "dispersion_b", float(self.dispersion_b))

    @classmethod
    def independent(cls, mu, std, dispersion_b: float = 1.0, rho: float = 0.0) -> GaussianPriceSpec:
        """Equicorrelated spec from per-hour standard deviations."""
        mu = np.asarray(mu, dtype=float)
        std = np.broadcast_to(np.asarray(std, dtype=float), mu.shape)
        corr = np.full((mu.size, mu.size), float(rho))
        np.fill_diagonal(corr, 1.0)
        return cls(mu, corr * np.outer(std, std), dispersion_b)

    @property
    def hours(self) -> int:
        return self.mu.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        return self.dispersion_b**2 * self.sigma

    @property
    def std(self) -> np.ndarray:
        return self.dispersion_b * np.sqrt(np.diag(self.sigma))

    def correlation(self, i: int, j: int) -> float:
        denom = np.sqrt(self.sigma[i, i] * self.sigma[j, j])
        return 0.0 if denom == 0 else float(self.sigma[i, j] / denom)

    def quantile(self, level: float) -> np.ndarray:
        from scipy.stats import norm

        return self.mu + self.std * norm.ppf(level)


@dataclass(frozen=True)
class BatteryConfig:
    """Storage asset parameters.

    ``kappa`` capacity (MWh), ``eta`` one-way efficiency, ``xi`` power (MW),
    ``cycles`` full cycles per day, ``n_buy``/``n_sell`` maximal bid counts.
    """

    kappa: float = 10.0
    eta: float = 0.95
    xi: float = 10.0
    cycles: int = 1
    n_buy: int = 1
    n_sell: int = 1

    def __post_init__(self):
        check_positive(self.kappa, "kappa")
        check_positive(self.xi, "xi")
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        check_positive_int(self.cycles, "cycles")
        check_positive_int(self.n_buy, "n_buy")
        check_positive_int(self.n_sell, "n_sell")

    @classmethod
    def from_duration(cls, kappa: float = 10.0, duration: float = 1.0, **kwargs) -> BatteryConfig:
        return cls(kappa=kappa, xi=kappa / duration, **kwargs)

    @property
    def duration(self) -> float:
        return self.kappa / self.xi

    @property
    def max_buy(self) -> float:
        return self.xi / self.eta

    @property
    def max_sell(self) -> float:
        return self.eta * self.xi


@dataclass(frozen=True, eq=False)
class BidSchedule:
    """Per-hour buy and sell volumes (MWh), optionally with limit prices."""

    buy: np.ndarray
    sell: np.ndarray
    buy_limit: np.ndarray | None = None
    sell_limit: np.ndarray | None = None

    def __post_init__(self):
        buy = check_vector(self.buy, "buy")
        sell = check_vector(self.sell, "sell", length=buy.shape[0])
        if np.any(buy < -FEAS_TOL) or np.any(sell < -FEAS_TOL):
            raise ValueError("bid volumes must be non-negative")
        object.__setattr__(self, "buy", _frozen(np.clip(buy, 0.0, None)))
        object.__setattr__(self, "sell", _frozen(np.clip(sell, 0.0, None)))
        for name in ("buy_limit", "sell_limit"):
            lim = getattr(self, name)
            if lim is not None:
                lim = np.asarray(lim, dtype=float)
                if lim.shape != buy.shape or np.any(np.isnan(lim)):
                    raise ValueError(f"{name} must have length {buy.shape[0]} and no NaN")
                object.__setattr__(self, name, _frozen(lim))

    @classmethod
    def zeros(cls, hours: int = DEFAULT_HOURS) -> BidSchedule:
        return cls(np.zeros(hours), np.zeros(hours))

    @classmethod
    def pair(cls, hours: int, buy_hour: int, sell_hour: int, buy_volume: float, sell_volume: float) -> BidSchedule:
        buy, sell = np.zeros(hours), np.zeros(hours)
        buy[buy_hour] = buy_volume
        sell[sell_hour] = sell_volume
        return cls(buy, sell)

    @property
    def hours(self) -> int:
        return self.buy.shape[0]

    @property
    def has_limits(self) -> bool:
        return self.buy_limit is not None or self.sell_limit is not None

    @property
    def n_bids(self) -> int:
        return int(np.sum(self.buy > FEAS_TOL) + np.sum(self.sell > FEAS_TOL))

    @property
    def is_empty(self) -> bool:
        return self.n_bids == 0

    def net_position(self, eta: float) -> np.ndarray:
        """Per-hour cash weight ``w`` such that the return is ``w @ prices``."""
        return -self.buy / eta + self.sell * eta

    def storage_balance(self, eta: float) -> np.ndarray:
        return np.cumsum(eta * self.buy - self.sell / eta)

    def __eq__(self, other):
        if not isinstance(other, BidSchedule):
            return NotImplemented

        def same(a, b):
            return (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))

        return (
            np.array_equal(self.buy, other.buy)
            and np.array_equal(self.sell, other.sell)
            and same(self.buy_limit, other.buy_limit)
            and same(self.sell_limit, other.sell_limit)
        )

    __hash__ = None


class RiskKind(str, enum.Enum):
    EXPECTED_PROFIT = "expected_profit"
    CVAR = "cvar"


@dataclass(frozen=True)
class RiskSpec:
    """Risk measure maximized by the optimizers.

    ``CVaR`` at level ``alpha`` is the mean of the worst ``(1 - alpha)``
    fraction of returns (lower tail).
    """

    kind: RiskKind = RiskKind.EXPECTED_PROFIT
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RiskKind(self.kind))
        if self.kind is RiskKind.CVAR:
            if self.alpha is None:
                raise ValueError("CVaR requires alpha")
            object.__setattr__(self, "alpha", check_probability(self.alpha, "alpha"))
        elif self.alpha is not None:
            raise ValueError("alpha is only meaningful for CVaR")

    @classmethod
    def expected_profit(cls) -> RiskSpec:
        return cls(RiskKind.EXPECTED_PROFIT)

    @classmethod
    def cvar(cls, alpha: float) -> RiskSpec:
        return cls(RiskKind.CVAR, alpha)

    @property
    def label(self) -> str:
        return "EP" if self.kind is RiskKind.EXPECTED_PROFIT else f"CVaR_{self.alpha:g}"


@dataclass(frozen=True, eq=False)
class ScoreSeries:
    """Per-day values of one score for one model."""

    model_tag: str
    score_tag: str
    values: np.ndarray
    lower_is_better: bool = True
    dates: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(check_vector(self.values, "values", allow_empty=True)))
        if self.dates and len(self.dates) != self.values.shape[0]:
            raise ValueError("dates and values differ in length")
        object.__setattr__(self, "dates", tuple(self.dates))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class Violation:
    family: str
    hour: int | None
    detail: str


@dataclass(frozen=True)
class ValidityReport:
    violations: tuple[Violation, ...]
    terminal_balance: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def families(self) -> set[str]:
        return {v.family for v in self.violations}


def validate_bid_schedule(schedule: BidSchedule, config: BatteryConfig, hours: int | None = None,
                          tol: float = FEAS_TOL) -> ValidityReport:
    """Check a schedule against the storage constraints of ``config``.

    Every violated constraint is reported with its family name and the first
    offending hour.  ``hours`` optionally pins the expected grid length.
    """
    if hours is not None and schedule.hours != hours:
        raise ValueError(f"schedule has {schedule.hours} hours, expected {hours}")
    eta, buy, sell = config.eta, schedule.buy, schedule.sell
    out: list[Violation] = []

    def first(mask, family, detail):
        idx = np.flatnonzero(mask)
        if idx.size:
            out.append(Violation(family, int(idx[0]), detail))

    first(buy > config.max_buy + tol, "bid limits", f"buy volume exceeds xi/eta = {config.max_buy:g}")
    first(sell > config.max_sell + tol, "bid limits", f"sell volume exceeds eta*xi = {config.max_sell:g}")
    first((buy > tol) & (sell > tol), "no simultaneous buy and sell", "buy and sell in the same hour")
    if np.sum(buy > tol) > config.n_buy:
        out.append(Violation("number of buy bids", None, f"{int(np.sum(buy > tol))} > {config.n_buy}"))
    if np.sum(sell > tol) > config.n_sell:
        out.append(Violation("number of sell bids", None, f"{int(np.sum(sell > tol))} > {config.n_sell}"))
    balance = schedule.storage_balance(eta)
    first(balance < -tol, "charge limits", "storage balance negative")
    first(balance > config.kappa + tol, "charge limits", f"storage balance above kappa = {config.kappa:g}")
    terminal = float(balance[-1])
    if abs(terminal) > tol:
        out.append(Violation("terminal balance", schedule.hours - 1, f"storage not empty at the end ({terminal:g})"))
    charged = float(np.sum(eta * buy))
    if charged > config.cycles * config.kappa + tol:
        out.append(Violation("cycle limit", None, f"charged {charged:g} > cycles*kappa = {config.cycles * config.kappa:g}"))
    return ValidityReport(tuple(out), terminal)


def realized_return(schedule: BidSchedule, day: PriceDay | np.ndarray, eta: float) -> float:
    """Cash flow of an unlimited schedule settled at realized prices (EUR)."""
    if schedule.has_limits:
        raise ValueError("limit-price schedules settle through bessbench.qbts, not realized_return")
    prices = day.prices if isinstance(day, PriceDay) else check_vector(day, "prices")
    if prices.shape[0] != schedule.hours:
        raise ValueError(f"schedule has {schedule.hours} hours but prices have {prices.shape[0]}")
    return float(schedule.net_position(eta) @ prices)
