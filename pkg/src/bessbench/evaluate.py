"""Backtests, economic measures, cross-scoring and the non-propriety examples.

Cross-scoring only looks at the hours a model actually bid; a forecast's
quality on hours without bids never enters the matrix.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from bessbench._validation import check_positive, check_probability, check_vector
from bessbench.core import (
    BatteryConfig,
    BidSchedule,
    PriceDay,
    RiskKind,
    RiskSpec,
    ScenarioEnsemble,
    realized_return,
)
from bessbench.io import write_rows
from bessbench.optimize import dp_optimize, milp_optimize, predicted_objective_distribution
from bessbench.optimize.risk import var_cvar
from bessbench.optimize.solvers import SolverOptions
from bessbench.scoring.calibration import joint_var_cvar_scores
from bessbench.scoring.dm import dm_test

RESULT_COLUMNS = ("date", "model", "predicted_objective", "realized_return", "n_bids")
CROSS_COLUMNS = ("row_model", "col_model", "score", "dm_stat", "dm_p")


@dataclass(frozen=True, eq=False)
class DayRecord:
    date: object
    model: str
    schedule: BidSchedule
    predicted_objective: float
    realized_return: float
    predicted_returns: np.ndarray


@dataclass(frozen=True, eq=False)
class BacktestResult:
    """One record per (date, model), in date order within each model."""

    records: tuple[DayRecord, ...]
    config: BatteryConfig
    risk: RiskSpec
    method: str
    config_hash: str = ""
    dates: tuple = field(default=())
    models: tuple[str, ...] = field(default=())

    def for_model(self, model: str) -> list[DayRecord]:
        out = [r for r in self.records if r.model == model]
        if not out:
            raise ValueError(f"no records for model {model!r}")
        return out

    def returns(self, model: str) -> np.ndarray:
        return np.array([r.realized_return for r in self.for_model(model)])

    def rows(self) -> list[tuple]:
        return [(r.date, r.model, r.predicted_objective, r.realized_return, r.schedule.n_bids) for r in self.records]

    def write_csv(self, path) -> None:
        write_rows(path, RESULT_COLUMNS, self.rows(), meta={"config_hash": self.config_hash})


def config_hash(payload: Mapping) -> str:
    """SHA-256 of a JSON rendering with sorted keys."""
    text = json.dumps(payload, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _date_key(tag):
    return tag.isoformat() if hasattr(tag, "isoformat") else tag


def _align(forecasts, prices: Sequence[PriceDay]) -> list[ScenarioEnsemble]:
    dates = [p.date_tag for p in prices]
    if isinstance(forecasts, Mapping):
        by_key = {_date_key(k): v for k, v in forecasts.items()}
        missing = [d for d in dates if _date_key(d) not in by_key]
        if missing:
            raise ValueError(f"forecasts missing for dates {[_date_key(d) for d in missing[:10]]}")
        return [by_key[_date_key(d)] for d in dates]
    seq = list(forecasts)
    if len(seq) != len(prices):
        raise ValueError(f"{len(seq)} forecasts for {len(prices)} price days")
    bad = [_date_key(p.date_tag) for f, p in zip(seq, prices)
           if f.date_tag is not None and p.date_tag is not None and _date_key(f.date_tag) != _date_key(p.date_tag)]
    if bad:
        raise ValueError(f"forecast and price dates disagree on {bad[:10]}")
    return seq


def _optimize_day(args) -> tuple[BidSchedule, float]:
    forecast, config, risk, method, solver_opts = args
    if method == "dp":
        schedule, _, objective = dp_optimize(forecast, config, risk)
        return schedule, objective
    sol = milp_optimize(forecast, config, risk, solver_opts)
    return sol.schedule, sol.objective


def run_backtest(forecasts: Mapping[str, object], prices: Sequence[PriceDay], config: BatteryConfig,
                 risk: RiskSpec, method: str = "dp", solver_opts: SolverOptions | None = None,
                 jobs: int = 1, hash_payload: Mapping | None = None) -> BacktestResult:
    """Optimize every (model, day), settle at realized prices and record the prediction.

    Parameters
    ----------
    forecasts : mapping model -> (mapping date -> ScenarioEnsemble, or a
        sequence aligned with ``prices``)
    prices : realized days, in the order records are produced
    method : ``"dp"`` (single pair) or ``"milp"``
    jobs : worker processes; results do not depend on it
    hash_payload : content hashed into ``config_hash`` (defaults to the
        battery and risk settings)
    """
    if method not in ("dp", "milp"):
        raise ValueError(f"method must be 'dp' or 'milp', got {method!r}")
    if not prices:
        raise ValueError("need at least one price day")
    models = tuple(forecasts)
    aligned = {m: _align(forecasts[m], prices) for m in models}
    tasks = [(aligned[m][i], config, risk, method, solver_opts) for m in models for i in range(len(prices))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            solved = list(pool.map(_optimize_day, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        solved = [_optimize_day(t) for t in tasks]
    records = []
    it = iter(solved)
    for m in models:
        for i, day in enumerate(prices):
            schedule, objective = next(it)
            ens = aligned[m][i]
            records.append(DayRecord(day.date_tag, m, schedule, float(objective),
                                     realized_return(schedule, day, config.eta),
                                     predicted_objective_distribution(ens, schedule, config.eta)))
    payload = hash_payload or {"config": config.__dict__, "risk": [risk.kind.value, risk.alpha], "method": method}
    return BacktestResult(tuple(records), config, risk, method, config_hash(payload),
                          tuple(p.date_tag for p in prices), models)


@dataclass(frozen=True)
class EconomicMeasures:
    """``sharpe`` is NaN and ``sharpe_defined`` False when returns have zero spread."""

    model: str
    days: int
    total_profit: float
    sharpe: float
    sharpe_defined: bool
    var_exceedance: float
    no_bid_days: int


def economic_measures(result: BacktestResult, alpha_for_var: float) -> dict[str, EconomicMeasures]:
    """Total profit, Sharpe ratio, VaR exceedance ratio and no-bid days per model.

    The VaR of each day is the ``alpha_for_var`` VaR of the model's own
    predicted return sample on its chosen schedule; a day counts as an
    exceedance when the realized return falls strictly below it.
    """
    alpha = check_probability(alpha_for_var, "alpha_for_var")
    out = {}
    for model in result.models:
        recs = result.for_model(model)
        r = np.array([x.realized_return for x in recs])
        if r.size < 2:
            raise ValueError("economic measures need at least 2 days")
        sd = float(np.std(r, ddof=1))
        defined = sd > 1e-12 * max(1.0, float(np.max(np.abs(r))))
        sharpe = float(np.mean(r) / sd) if defined else math.nan
        var = np.array([var_cvar(x.predicted_returns, alpha)[0] for x in recs])
        out[model] = EconomicMeasures(
            model, r.size, float(np.sum(r)), sharpe, defined,
            float(np.mean(r < var)), sum(1 for x in recs if x.schedule.is_empty),
        )
    return out


@dataclass(frozen=True, eq=False)
class CrossScoreMatrix:
    """``scores[i, m]``: mean score of model i's prediction on model m's bids.

    ``dm_stat`` and ``dm_p`` hold the DM test of cell (i, m) against the
    diagonal cell (m, m) under H0 "row i is no better than m on m's bids";
    the diagonal is NaN and so are degenerate cells (``degenerate`` True).
    """

    models: tuple[str, ...]
    scores: np.ndarray
    daily: np.ndarray
    dm_stat: np.ndarray
    dm_p: np.ndarray
    degenerate: np.ndarray
    score_name: str

    def rows(self) -> list[tuple]:
        n = len(self.models)
        return [(self.models[i], self.models[m], float(self.scores[i, m]), float(self.dm_stat[i, m]),
                 float(self.dm_p[i, m])) for i in range(n) for m in range(n)]

    def write_csv(self, path, meta: Mapping[str, str] | None = None) -> None:
        write_rows(path, CROSS_COLUMNS, self.rows(), meta=meta)


def cross_score(result: BacktestResult, forecasts: Mapping[str, object], prices: Sequence[PriceDay] | None = None,
                risk: RiskSpec | None = None, dm_lags: int = 0) -> CrossScoreMatrix:
    """Score every model's predicted return distribution on every model's bids.

    For CVaR the cell score is the joint (VaR, CVaR) score at tail
    probability ``1 - alpha``.  For expected profit it is the squared error
    between the predicted mean return and the realized return.

    Parameters
    ----------
    forecasts : the same per-model forecasts used for ``result``; keys must
        cover ``result.models``
    prices : price days used to align mapping-style forecasts (defaults to
        the result's dates with forecasts given as aligned sequences)
    """
    risk = risk or result.risk
    models = result.models
    missing = [m for m in models if m not in forecasts]
    if missing:
        raise ValueError(f"forecasts missing for models {missing}")
    n_days = len(result.dates)
    if prices is None:
        prices = [PriceDay(np.zeros(1), d) for d in result.dates]
    aligned = {m: _align(forecasts[m], prices) for m in models}
    eta = result.config.eta
    n = len(models)
    daily = np.empty((n, n, n_days))
    for col, m in enumerate(models):
        recs = result.for_model(m)
        if len(recs) != n_days:
            raise ValueError(f"model {m!r} has {len(recs)} records for {n_days} dates")
        y = np.array([r.realized_return for r in recs])
        for row, i in enumerate(models):
            samples = [predicted_objective_distribution(aligned[i][d], recs[d].schedule, eta) for d in range(n_days)]
            if risk.kind is RiskKind.CVAR:
                ve = np.array([var_cvar(s, risk.alpha) for s in samples])
                daily[row, col] = joint_var_cvar_scores(ve[:, 0], ve[:, 1], y, 1.0 - risk.alpha)
            else:
                mean = np.array([s.mean() for s in samples])
                daily[row, col] = (mean - y) ** 2
    scores = daily.mean(axis=2)
    stat = np.full((n, n), np.nan)
    pval = np.full((n, n), np.nan)
    degenerate = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for m in range(n):
            if i == m:
                continue
            res = dm_test(daily[i, m], daily[m, m], "greater", lags=dm_lags)
            degenerate[i, m] = res.degenerate
            stat[i, m], pval[i, m] = res.statistic, res.p_value
    name = f"joint_var_cvar_{risk.alpha!r}" if risk.kind is RiskKind.CVAR else "squared_error"
    return CrossScoreMatrix(models, scores, daily, stat, pval, degenerate, name)


def same_rank_forecast(reference, amplitude: float = 1.0):
    """A distorted forecast with the same hourly ranking and extremes as ``reference``.

    The cheapest hour ``b`` and dearest hour ``s`` of the reference mean path
    keep their values exactly.  Every other hour moves towards an evenly
    spaced ladder strictly inside ``(mu_b, mu_s)`` ordered like the
    reference, by the fraction ``amplitude`` in ``[0, 1]``.  A
    ``ScenarioEnsemble`` reference is shifted member-wise by the change in
    its mean path; a ``PriceDay`` or vector gives a point path back.

    Raises
    ------
    ValueError
        For a constant reference or ``amplitude`` outside ``[0, 1]``.
    """
    if not 0.0 <= amplitude <= 1.0:
        raise ValueError(f"amplitude must lie in [0, 1], got {amplitude}")
    if isinstance(reference, ScenarioEnsemble):
        mu = reference.paths.mean(axis=0)
    elif isinstance(reference, PriceDay):
        mu = reference.prices
    else:
        mu = check_vector(reference, "reference")
    k = mu.shape[0]
    b, s = int(np.argmin(mu)), int(np.argmax(mu))
    if mu[s] == mu[b] or k < 2:
        raise ValueError("reference must not be constant")
    order = np.argsort(mu, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    ladder = mu[b] + (mu[s] - mu[b]) * rank / (k - 1)
    target = mu + amplitude * (ladder - mu)
    target[b], target[s] = mu[b], mu[s]
    shift = target - mu
    shift[b] = shift[s] = 0.0
    if isinstance(reference, ScenarioEnsemble):
        return ScenarioEnsemble(reference.paths + shift, reference.date_tag)
    if isinstance(reference, PriceDay):
        return PriceDay(target, reference.date_tag)
    return target


def revenue_variance_difference(sigma_b: float, sigma_s: float, rho: float, eta: float, sigma_b_hat: float,
                                sigma_s_hat: float, rho_hat: float, kappa: float = 1.0) -> float:
    """True minus forecast variance of the round-trip revenue ``-(kappa/eta) P_b + eta kappa P_s``."""

    def var(sb, ss, r):
        return kappa**2 * (sb**2 / eta**2 + eta**2 * ss**2 - 2.0 * r * sb * ss)

    return float(var(sigma_b, sigma_s, rho) - var(sigma_b_hat, sigma_s_hat, rho_hat))


def covariance_twin(sigma_b: float, sigma_s: float, rho: float, eta: float, sigma_s_hat: float,
                    rho_hat: float) -> float:
    """Forecast buy-hour SD giving the same round-trip revenue variance as the truth.

    Setting :func:`revenue_variance_difference` to zero is a quadratic in
    ``sigma_b_hat``; the positive root closest to ``sigma_b`` is returned.

    Raises
    ------
    ValueError
        If no positive root exists for these parameters.
    """
    for name, v in (("sigma_b", sigma_b), ("sigma_s", sigma_s), ("eta", eta)):
        check_positive(v, name)
    check_positive(sigma_s_hat, "sigma_s_hat", strict=False)
    for name, r in (("rho", rho), ("rho_hat", rho_hat)):
        if not -1.0 <= r <= 1.0:
            raise ValueError(f"{name} must lie in [-1, 1], got {r}")
    e2 = eta**2
    half_b = e2 * rho_hat * sigma_s_hat
    const = sigma_b**2 + e2**2 * (sigma_s**2 - sigma_s_hat**2) - 2.0 * e2 * rho * sigma_b * sigma_s
    disc = half_b**2 + const
    if disc < 0:
        raise ValueError("no real forecast SD matches the revenue variance for these parameters")
    root = math.sqrt(disc)
    roots = [r for r in (half_b + root, half_b - root) if r > 0]
    if not roots:
        raise ValueError("no positive forecast SD matches the revenue variance for these parameters")
    return min(roots, key=lambda r: abs(r - sigma_b))
