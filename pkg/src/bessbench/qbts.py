"""Quantile-based trading strategies and their analytic/Monte-Carlo calculators.

A QBTS bid is a coupled pair of limit orders: buy ``kappa / eta`` MWh at
hour ``b`` if the price is at most the forecast ``(1 - alpha)``-quantile and
sell ``eta * kappa`` MWh at hour ``s`` if the price is at least the forecast
``alpha``-quantile.  Either both legs execute or neither does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from bessbench._validation import check_positive_int, check_random_state
from bessbench.core import BatteryConfig, BidSchedule, GaussianPriceSpec, PriceDay, QuantileForecast, ScenarioEnsemble

DEFAULT_MC_DRAWS = 1_000_000


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")
    return alpha


def _trade_size(config: BatteryConfig) -> float:
    return min(config.kappa, config.xi)


@dataclass(frozen=True)
class QbtsBid:
    buy_hour: int
    sell_hour: int
    buy_limit: float
    sell_limit: float
    buy_volume: float
    sell_volume: float
    eta: float
    alpha: float

    def __post_init__(self):
        if self.buy_hour == self.sell_hour:
            raise ValueError("buy and sell hour must differ")
        if not (np.isfinite(self.buy_limit) and np.isfinite(self.sell_limit)):
            raise ValueError("limit prices must be finite")

    def to_schedule(self, hours: int) -> BidSchedule:
        sched = BidSchedule.pair(hours, self.buy_hour, self.sell_hour, self.buy_volume, self.sell_volume)
        buy_lim = np.full(hours, np.inf)
        sell_lim = np.full(hours, -np.inf)
        buy_lim[self.buy_hour] = self.buy_limit
        sell_lim[self.sell_hour] = self.sell_limit
        return BidSchedule(sched.buy, sched.sell, buy_lim, sell_lim)


@dataclass(frozen=True)
class StrategyOutcome:
    accepted: bool
    cash: float
    traded_mwh: float


def best_pair(sell_value: np.ndarray, buy_cost: np.ndarray, ordered: bool = True) -> tuple[int, int, float]:
    """Maximize ``sell_value[s] - buy_cost[b]``; ties go to the smallest ``(b, s)``.

    With ``ordered`` the pair must satisfy ``b < s``; otherwise only ``b != s``.
    """
    n = sell_value.shape[0]
    if n < 2:
        raise ValueError("need at least 2 hours to pick a buy/sell pair")
    gain = sell_value[None, :] - buy_cost[:, None]
    mask = np.triu(np.ones((n, n), dtype=bool), k=1) if ordered else ~np.eye(n, dtype=bool)
    gain = np.where(mask, gain, -np.inf)
    flat = int(np.argmax(gain))
    b, s = divmod(flat, n)
    return b, s, float(gain[b, s])


def qbts_construct(forecast: QuantileForecast, alpha: float, config: BatteryConfig,
                   ordered: bool = True) -> QbtsBid:
    """Pick hours by the median spread and attach quantile limit prices.

    ``ordered=False`` drops the buy-before-sell restriction and uses the plain
    argmin/argmax of the median (literature variant, not used in acceptance).
    """
    alpha = _check_alpha(alpha)
    med = forecast.quantile(0.5)
    eta = config.eta
    if ordered:
        b, s, _ = best_pair(eta * med, med / eta)
    else:
        b, s = int(np.argmin(med)), int(np.argmax(med))
        if b == s:
            raise ValueError("median forecast is constant; argmin and argmax coincide")
    size = _trade_size(config)
    return QbtsBid(b, s, float(forecast.quantile(1 - alpha)[b]), float(forecast.quantile(alpha)[s]),
                   size / eta, eta * size, eta, alpha)


def qbts_settle(bid: QbtsBid, day: PriceDay) -> StrategyOutcome:
    p = day.prices
    if max(bid.buy_hour, bid.sell_hour) >= p.shape[0]:
        raise ValueError("bid hour outside the price day")
    p_b, p_s = p[bid.buy_hour], p[bid.sell_hour]
    if p_b <= bid.buy_limit and p_s >= bid.sell_limit:
        cash = -bid.buy_volume * p_b + bid.sell_volume * p_s
        return StrategyOutcome(True, float(cash), bid.buy_volume + bid.sell_volume)
    return StrategyOutcome(False, 0.0, 0.0)


def ts1_construct(forecast: QuantileForecast, alpha: float, config: BatteryConfig,
                  no_trade_filter: bool = True) -> BidSchedule:
    """TS-1: choose hours by the pessimistic quantile spread, place unlimited orders.

    The pair maximizes ``eta * Q_s^alpha - Q_b^(1-alpha) / eta``.  With the
    filter on, a non-positive best value returns the empty schedule.
    """
    alpha = _check_alpha(alpha)
    eta = config.eta
    b, s, value = best_pair(eta * forecast.quantile(alpha), forecast.quantile(1 - alpha) / eta)
    if no_trade_filter and value <= 0:
        return BidSchedule.zeros(forecast.hours)
    size = _trade_size(config)
    return BidSchedule.pair(forecast.hours, b, s, size / eta, eta * size)


# --------------------------------------------------------------------------
# Calculators for Gaussian truth and forecast


@dataclass(frozen=True)
class QbtsProfit:
    """Expected-profit decomposition ``expected_profit = ap * ep``.

    ``ep`` is NaN when the acceptance probability is zero.  The ``*_se``
    fields are Monte-Carlo standard errors (0 for the analytic path).
    """

    ap: float
    ep: float
    expected_profit: float
    ap_se: float = 0.0
    profit_se: float = 0.0


def _limits(forecast_spec: GaussianPriceSpec, b: int, s: int, alpha: float) -> tuple[float, float]:
    return float(forecast_spec.quantile(1 - alpha)[b]), float(forecast_spec.quantile(alpha)[s])


def _pair_moments(spec: GaussianPriceSpec, b: int, s: int):
    cov = spec.covariance
    return (spec.mu[b], spec.mu[s]), np.array([[cov[b, b], cov[b, s]], [cov[s, b], cov[s, s]]])


def _draw_pair(spec: GaussianPriceSpec, b: int, s: int, n: int, seed) -> np.ndarray:
    mean, cov = _pair_moments(spec, b, s)
    rng = check_random_state(seed)
    vals, vecs = np.linalg.eigh(cov)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return np.asarray(mean) + rng.standard_normal((n, 2)) @ root.T


def _check_method(method: str, true_spec: GaussianPriceSpec, b: int, s: int) -> None:
    if method not in ("analytic-independent", "monte-carlo"):
        raise ValueError(f"unknown method {method!r}")
    if method == "analytic-independent" and abs(true_spec.correlation(b, s)) > 0:
        raise ValueError("the analytic path requires zero correlation between the buy and sell hour")


def qbts_acceptance_probability(true_spec: GaussianPriceSpec, forecast_spec: GaussianPriceSpec, b: int, s: int,
                                alpha: float, method: str = "monte-carlo", n_draws: int = DEFAULT_MC_DRAWS,
                                seed=0) -> float:
    """Probability that true prices satisfy both limit conditions."""
    return qbts_expected_profit(true_spec, forecast_spec, b, s, alpha, BatteryConfig(1.0, 1.0, 1.0),
                                method, n_draws, seed).ap


def qbts_expected_profit(true_spec: GaussianPriceSpec, forecast_spec: GaussianPriceSpec, b: int, s: int,
                         alpha: float, config: BatteryConfig, method: str = "monte-carlo",
                         n_draws: int = DEFAULT_MC_DRAWS, seed=0) -> QbtsProfit:
    """Acceptance probability, conditional profit and their product.

    Analytic path (independent hours): ``AP = Phi(z_b) (1 - Phi(z_s))`` and the
    conditional means are truncated-normal means.  Monte-Carlo path: seeded
    bivariate normal draws of the two hours.
    """
    alpha = _check_alpha(alpha)
    _check_method(method, true_spec, b, s)
    q_buy, q_sell = _limits(forecast_spec, b, s, alpha)
    size = _trade_size(config)
    w_buy, w_sell = size / config.eta, config.eta * size
    if method == "analytic-independent":
        sd = np.sqrt(np.diag(true_spec.covariance))
        if sd[b] == 0 or sd[s] == 0:
            raise ValueError("analytic path needs positive true standard deviations")
        z_b = (q_buy - true_spec.mu[b]) / sd[b]
        z_s = (q_sell - true_spec.mu[s]) / sd[s]
        p_b, p_s = stats.norm.cdf(z_b), stats.norm.sf(z_s)
        ap = float(p_b * p_s)
        if ap == 0.0:
            return QbtsProfit(0.0, float("nan"), 0.0)
        mean_b = true_spec.mu[b] - sd[b] * stats.norm.pdf(z_b) / p_b
        mean_s = true_spec.mu[s] + sd[s] * stats.norm.pdf(z_s) / p_s
        ep = float(-w_buy * mean_b + w_sell * mean_s)
        return QbtsProfit(ap, ep, ap * ep)
    n_draws = check_positive_int(n_draws, "n_draws")
    x = _draw_pair(true_spec, b, s, n_draws, seed)
    acc = (x[:, 0] <= q_buy) & (x[:, 1] >= q_sell)
    cash = np.where(acc, -w_buy * x[:, 0] + w_sell * x[:, 1], 0.0)
    ap = float(acc.mean())
    ep = float(cash[acc].mean()) if acc.any() else float("nan")
    return QbtsProfit(ap, ep, float(cash.mean()),
                      float(np.sqrt(ap * (1 - ap) / n_draws)), float(cash.std(ddof=1) / np.sqrt(n_draws)))


def qbts_profit_difference(true_spec: GaussianPriceSpec, forecast_a: GaussianPriceSpec,
                           forecast_b: GaussianPriceSpec, b: int, s: int, alpha: float, config: BatteryConfig,
                           n_draws: int = DEFAULT_MC_DRAWS, seed=0) -> tuple[float, float]:
    """Monte-Carlo ``E[R_a] - E[R_b]`` on common draws, with its standard error."""
    alpha = _check_alpha(alpha)
    x = _draw_pair(true_spec, b, s, check_positive_int(n_draws, "n_draws"), seed)
    size = _trade_size(config)
    cash = -size / config.eta * x[:, 0] + config.eta * size * x[:, 1]

    def settle(spec):
        q_buy, q_sell = _limits(spec, b, s, alpha)
        return np.where((x[:, 0] <= q_buy) & (x[:, 1] >= q_sell), cash, 0.0)

    d = settle(forecast_a) - settle(forecast_b)
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(d.size))


def empirical_acceptance_probability(forecast: ScenarioEnsemble, bid: QbtsBid) -> float:
    """Share of ensemble members that would execute both legs of ``bid``."""
    f = forecast.paths
    ok = (f[:, bid.buy_hour] <= bid.buy_limit) & (f[:, bid.sell_hour] >= bid.sell_limit)
    return float(ok.mean())


# --------------------------------------------------------------------------
# Simulation-study grids


SIM_COLUMNS = ["mu_b", "mu_s", "sigma", "rho", "dispersion", "alpha", "ap", "ep", "expected_profit"]


def _grid_cell(task) -> dict:
    (mu_b, mu_s, sigma), rho, disp, alpha, config, n_draws, ss = task
    truth = GaussianPriceSpec.independent([mu_b, mu_s], sigma, 1.0, rho)
    fc = GaussianPriceSpec.independent([mu_b, mu_s], sigma, disp, rho)
    res = qbts_expected_profit(truth, fc, 0, 1, alpha, config, "monte-carlo", n_draws, ss)
    return {"mu_b": mu_b, "mu_s": mu_s, "sigma": sigma, "rho": rho, "dispersion": disp,
            "alpha": alpha, "ap": res.ap, "ep": res.ep, "expected_profit": res.expected_profit}


def simulation_grid(panels, dispersions, alphas, rhos=(0.0,), config: BatteryConfig | None = None,
                    n_draws: int = DEFAULT_MC_DRAWS, seed=0, jobs: int = 1) -> list[dict]:
    """Monte-Carlo AP / EP / expected profit over panels x rho x dispersion x alpha.

    ``panels`` are ``(mu_b, mu_s, sigma)`` triples.  Hour 0 is the buy hour,
    hour 1 the sell hour.  Each cell gets its own child seed, so rows do not
    depend on grid order or on how cells are distributed across ``jobs``
    worker processes.
    """
    config = config or BatteryConfig(kappa=1.0, eta=1.0, xi=1.0)
    cells = [(tuple(p), r, d, a) for p in panels for r in rhos for d in dispersions for a in alphas]
    for (mu_b, mu_s, sigma), *_ in cells:
        if sigma <= 0:
            raise ValueError(f"panel ({mu_b}, {mu_s}, {sigma}) has non-positive sigma; quantiles are undefined")
    seeds = np.random.SeedSequence(seed).spawn(len(cells))
    tasks = [(*cell, config, n_draws, ss) for cell, ss in zip(cells, seeds)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_grid_cell, tasks))
    return [_grid_cell(t) for t in tasks]
