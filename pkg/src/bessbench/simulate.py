"""Synthetic prices, Gaussian-copula scenario sampling and benchmark forecasters.

The functions implement the operations; the estimator classes at the bottom
wrap them in a ``fit`` / ``sample`` interface with scikit-learn parameter
handling so forecasters can be configured and cloned uniformly.
"""

from __future__ import annotations

import datetime as _dt
import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator

from bessbench._validation import check_matrix, check_positive_int, check_random_state
from bessbench.core import GaussianPriceSpec, PriceDay, ScenarioEnsemble
from bessbench.io import load_price_csv  # noqa: F401  (CSV ingestion is part of this module's surface)

EIG_FLOOR = 1e-8


# --------------------------------------------------------------------------
# Gaussian prices


def _sqrt_psd(cov: np.ndarray) -> np.ndarray:
    """Factor ``L`` with ``L @ L.T == cov`` for a PSD matrix."""
    vals, vecs = np.linalg.eigh(cov)
    scale = max(1.0, float(np.max(np.abs(vals), initial=0.0)))
    if vals.min(initial=0.0) < -1e-10 * scale:
        raise ValueError("covariance is not positive semidefinite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_gaussian_prices(spec: GaussianPriceSpec, count: int, seed, date_tag=None) -> ScenarioEnsemble:
    """Draw ``count`` price paths from ``N(mu, b^2 sigma)``."""
    count = check_positive_int(count, "count")
    rng = check_random_state(seed)
    root = _sqrt_psd(spec.covariance)
    z = rng.standard_normal((count, spec.hours))
    return ScenarioEnsemble(spec.mu + z @ root.T, date_tag)


# --------------------------------------------------------------------------
# Copulas


class CopulaKind(str, enum.Enum):
    INDEPENDENT = "independent"
    EMPIRICAL = "empirical"
    WEEKDAY = "weekday"


def repair_correlation(corr: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Clip eigenvalues at ``floor`` and rescale to unit diagonal."""
    corr = 0.5 * (corr + corr.T)
    vals, vecs = np.linalg.eigh(corr)
    if vals.min() >= floor:
        out = corr.copy()
    else:
        out = (vecs * np.clip(vals, floor, None)) @ vecs.T
    d = np.sqrt(np.diag(out))
    out = out / np.outer(d, d)
    np.fill_diagonal(out, 1.0)
    return 0.5 * (out + out.T)


@dataclass(frozen=True, eq=False)
class CopulaModel:
    """Gaussian copula: one correlation matrix, or one per weekday (0=Mon)."""

    kind: CopulaKind
    correlation: np.ndarray | None = None
    by_weekday: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", CopulaKind(self.kind))
        if self.kind is CopulaKind.WEEKDAY:
            if not self.by_weekday:
                raise ValueError("weekday copula needs per-weekday correlation matrices")
            for wd, c in self.by_weekday.items():
                self._check(c, f"weekday {wd}")
        else:
            if self.correlation is None:
                raise ValueError(f"{self.kind.value} copula needs a correlation matrix")
            self._check(self.correlation, "correlation")

    @staticmethod
    def _check(c: np.ndarray, name: str) -> None:
        c = np.asarray(c)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"{name} must be square")
        if not np.allclose(c, c.T, atol=1e-10) or not np.allclose(np.diag(c), 1.0, atol=1e-10):
            raise ValueError(f"{name} must be symmetric with unit diagonal")
        if np.linalg.eigvalsh(c).min() < -1e-8:
            raise ValueError(f"{name} is not positive semidefinite")

    @classmethod
    def independent(cls, hours: int) -> CopulaModel:
        return cls(CopulaKind.INDEPENDENT, np.eye(hours))

    @property
    def hours(self) -> int:
        c = self.correlation if self.correlation is not None else next(iter(self.by_weekday.values()))
        return c.shape[0]

    def matrix_for(self, weekday: int | None = None) -> np.ndarray:
        if self.kind is not CopulaKind.WEEKDAY:
            return np.asarray(self.correlation)
        if weekday is None:
            raise ValueError("weekday copula needs the target weekday")
        if weekday not in self.by_weekday:
            raise ValueError(f"no correlation matrix fitted for weekday {weekday}")
        return np.asarray(self.by_weekday[weekday])


def rank_uniformize(x: np.ndarray) -> np.ndarray:
    """Column-wise average ranks mapped to ``(rank - 0.5) / n``."""
    ranks = stats.rankdata(x, axis=0, method="average")
    return (ranks - 0.5) / x.shape[0]


def _gaussian_correlation(pit: np.ndarray) -> np.ndarray:
    g = stats.norm.ppf(rank_uniformize(pit))
    std = g.std(axis=0)
    const = np.flatnonzero(std == 0)
    if const.size:
        raise ValueError(f"hour {int(const[0])} has a constant column; correlation undefined")
    corr = np.atleast_2d(np.corrcoef(g, rowvar=False))
    return repair_correlation(corr)


def fit_copula(pit_residuals, kind: CopulaKind | str = CopulaKind.EMPIRICAL,
               weekday_tags: Sequence[int] | None = None) -> CopulaModel:
    """Estimate a Gaussian copula from PIT residuals in ``(0, 1)``.

    Rows are days, columns hours.  Values are re-ranked per column before the
    normal-scores transform so they are equally spaced.
    """
    kind = CopulaKind(kind)
    pit = check_matrix(pit_residuals, "pit_residuals")
    if kind is CopulaKind.INDEPENDENT:
        return CopulaModel.independent(pit.shape[1])
    if pit.shape[0] < 2:
        raise ValueError("need at least 2 rows to estimate a correlation")
    if np.any(pit <= 0) or np.any(pit >= 1):
        raise ValueError("PIT residuals must lie strictly inside (0, 1)")
    if kind is CopulaKind.EMPIRICAL:
        return CopulaModel(kind, _gaussian_correlation(pit))
    if weekday_tags is None or len(weekday_tags) != pit.shape[0]:
        raise ValueError("weekday copula needs one weekday tag per row")
    tags = np.asarray(weekday_tags)
    mats = {}
    for wd in sorted(set(tags.tolist())):
        rows = pit[tags == wd]
        if rows.shape[0] < 2:
            raise ValueError(f"weekday {wd} has fewer than 2 rows")
        mats[int(wd)] = _gaussian_correlation(rows)
    return CopulaModel(kind, None, mats)


# --------------------------------------------------------------------------
# Marginals


@dataclass(frozen=True, eq=False)
class MarginalModel:
    """Per-hour inverse CDFs.

    Either ``pool`` (an ``(n, hours)`` array of empirical samples) or a
    parametric triple ``loc``, ``scale``, ``shape`` per hour with ``dist``
    one of ``"norm"`` or ``"t"`` (``shape`` = degrees of freedom).
    """

    pool: np.ndarray | None = None
    loc: np.ndarray | None = None
    scale: np.ndarray | None = None
    shape: np.ndarray | None = None
    dist: str = "norm"

    def __post_init__(self):
        if self.pool is not None:
            pool = check_matrix(self.pool, "pool")
            object.__setattr__(self, "pool", np.sort(pool, axis=0))
            return
        if self.loc is None or self.scale is None:
            raise ValueError("parametric marginals need loc and scale")
        loc = np.atleast_1d(np.asarray(self.loc, dtype=float))
        scale = np.broadcast_to(np.asarray(self.scale, dtype=float), loc.shape).copy()
        if np.any(scale <= 0):
            raise ValueError("marginal scale must be positive")
        if self.dist not in ("norm", "t"):
            raise ValueError(f"unsupported marginal distribution {self.dist!r}")
        if self.dist == "t":
            if self.shape is None:
                raise ValueError("Student-t marginals need degrees of freedom in shape")
            object.__setattr__(self, "shape", np.broadcast_to(np.asarray(self.shape, dtype=float), loc.shape).copy())
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scale", scale)

    @property
    def hours(self) -> int:
        return self.pool.shape[1] if self.pool is not None else self.loc.shape[0]

    def ppf(self, levels) -> np.ndarray:
        """Quantiles at ``levels`` for every hour, shape ``(len(levels), hours)``."""
        levels = np.atleast_1d(np.asarray(levels, dtype=float))
        if self.pool is not None:
            n = self.pool.shape[0]
            pos = (np.arange(1, n + 1) - 0.5) / n
            return np.column_stack([np.interp(levels, pos, self.pool[:, h]) for h in range(self.hours)])
        if self.dist == "norm":
            return self.loc + self.scale * stats.norm.ppf(levels)[:, None]
        return self.loc + self.scale * stats.t.ppf(levels[:, None], self.shape)


def sample_with_reordering(marginals: MarginalModel, copula: CopulaModel, count: int, seed,
                           weekday: int | None = None, date_tag=None) -> ScenarioEnsemble:
    """Gaussian-copula scenarios with marginals fixed to the ``(i - 0.5)/M`` grid.

    The copula sample only contributes ranks: for each hour the member with
    the ``r``-th smallest Gaussian draw receives the ``r``-th marginal quantile.
    """
    count = check_positive_int(count, "count", minimum=2)
    if marginals.hours != copula.hours:
        raise ValueError(f"marginals cover {marginals.hours} hours, copula {copula.hours}")
    rng = check_random_state(seed)
    root = _sqrt_psd(copula.matrix_for(weekday))
    z = rng.standard_normal((count, copula.hours)) @ root.T
    grid = marginals.ppf((np.arange(1, count + 1) - 0.5) / count)
    order = np.argsort(z, axis=0, kind="stable")
    paths = np.empty_like(grid)
    for h in range(copula.hours):
        paths[order[:, h], h] = grid[:, h]
    return ScenarioEnsemble(paths, date_tag)


# --------------------------------------------------------------------------
# Benchmark forecasters


def climatology_forecast(history: Sequence[PriceDay], count: int, seed, date_tag=None) -> ScenarioEnsemble:
    """Resample whole historical days uniformly with replacement."""
    if not history:
        raise ValueError("climatology needs a non-empty history")
    count = check_positive_int(count, "count")
    rng = check_random_state(seed)
    pool = np.vstack([d.prices for d in history])
    return ScenarioEnsemble(pool[rng.integers(0, len(history), size=count)], date_tag)


def _as_date(tag, what: str) -> _dt.date:
    if isinstance(tag, _dt.datetime):
        return tag.date()
    if isinstance(tag, _dt.date):
        return tag
    if isinstance(tag, str):
        return _dt.date.fromisoformat(tag)
    raise ValueError(f"{what} needs calendar dates as date_tag, got {tag!r}")


def naive_residual_pool(history: Sequence[PriceDay], weekday: int) -> np.ndarray:
    """Full-day residuals ``p_d - p_{d-7}`` for history days on ``weekday``."""
    by_date = {_as_date(d.date_tag, "naive bootstrap"): d.prices for d in history}
    rows = [p - by_date[dt - _dt.timedelta(days=7)]
            for dt, p in sorted(by_date.items())
            if dt.weekday() == weekday and dt - _dt.timedelta(days=7) in by_date]
    return np.vstack(rows) if rows else np.empty((0, 0))


def naive_bootstrap_forecast(history: Sequence[PriceDay], target_date, count: int, seed) -> ScenarioEnsemble:
    """Last week's same-weekday path plus resampled same-weekday residual days."""
    count = check_positive_int(count, "count")
    target = _as_date(target_date, "naive bootstrap")
    by_date = {_as_date(d.date_tag, "naive bootstrap"): d.prices for d in history}
    lag = target - _dt.timedelta(days=7)
    if lag not in by_date:
        raise ValueError(f"history lacks the lag-7 day {lag.isoformat()} for target {target.isoformat()}")
    pool = naive_residual_pool(history, target.weekday())
    if pool.shape[0] == 0:
        raise ValueError(f"no same-weekday residual days (weekday {target.weekday()}) in history")
    rng = check_random_state(seed)
    picks = rng.integers(0, pool.shape[0], size=count)
    return ScenarioEnsemble(by_date[lag] + pool[picks], target)


# --------------------------------------------------------------------------
# Estimator wrappers


class ClimatologyForecaster(BaseEstimator):
    """Whole-day bootstrap from the training days.

    Parameters
    ----------
    n_members : int
        Ensemble size produced by :meth:`sample`.
    """

    def __init__(self, n_members: int = 500):
        self.n_members = n_members

    def fit(self, history: Sequence[PriceDay], y=None):
        if not history:
            raise ValueError("climatology needs a non-empty history")
        self.history_ = list(history)
        return self

    def sample(self, target_date, seed) -> ScenarioEnsemble:
        _check_fitted(self)
        ens = climatology_forecast(self.history_, self.n_members, seed)
        return ScenarioEnsemble(ens.paths, target_date)


class NaiveBootstrapForecaster(BaseEstimator):
    """Seasonal-naive forecast with same-weekday residual trajectories.

    ``fit`` stores the training window; the residual pool is rebuilt from
    it for every target weekday.  The lag-7 base day may come from the
    training window or from ``recent``, the days observed since.
    """

    def __init__(self, n_members: int = 500):
        self.n_members = n_members

    def fit(self, history: Sequence[PriceDay], y=None):
        if not history:
            raise ValueError("naive bootstrap needs a non-empty history")
        self.history_ = list(history)
        return self

    def sample(self, target_date, seed, recent: Sequence[PriceDay] = ()) -> ScenarioEnsemble:
        _check_fitted(self)
        target = _as_date(target_date, "naive bootstrap")
        pool = naive_residual_pool(self.history_, target.weekday())
        if pool.shape[0] == 0:
            raise ValueError(f"no same-weekday residual days (weekday {target.weekday()}) in history")
        known = {_as_date(d.date_tag, "naive bootstrap"): d.prices for d in [*self.history_, *recent]}
        lag = target - _dt.timedelta(days=7)
        if lag not in known:
            raise ValueError(f"lag-7 day {lag.isoformat()} unavailable for target {target.isoformat()}")
        rng = check_random_state(seed)
        picks = rng.integers(0, pool.shape[0], size=self.n_members)
        return ScenarioEnsemble(known[lag] + pool[picks], target)


class GaussianCopulaSampler(BaseEstimator):
    """Copula estimator with rank-reordered sampling onto given marginals.

    Parameters
    ----------
    kind : {"independent", "empirical", "weekday"}
    n_members : int
    """

    def __init__(self, kind: str = "empirical", n_members: int = 500):
        self.kind = kind
        self.n_members = n_members

    def fit(self, pit_residuals, weekday_tags=None):
        self.copula_ = fit_copula(pit_residuals, self.kind, weekday_tags)
        return self

    def sample(self, marginals: MarginalModel, seed, weekday: int | None = None, date_tag=None) -> ScenarioEnsemble:
        _check_fitted(self)
        return sample_with_reordering(marginals, self.copula_, self.n_members, seed, weekday, date_tag)


def _check_fitted(est) -> None:
    from sklearn.exceptions import NotFittedError

    if not any(k.endswith("_") and not k.startswith("__") for k in vars(est)):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")
