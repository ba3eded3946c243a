import datetime as dt

import numpy as np
import pytest
from scipy import stats

from bessbench.core import BatteryConfig, GaussianPriceSpec, PriceDay, QuantileForecast, ScenarioEnsemble
from bessbench.qbts import (
    QbtsBid,
    empirical_acceptance_probability,
    qbts_acceptance_probability,
    qbts_construct,
    qbts_expected_profit,
    qbts_profit_difference,
    qbts_settle,
    simulation_grid,
    ts1_construct,
)

LEVELS = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
UNIT = BatteryConfig(kappa=1.0, eta=1.0, xi=1.0)


def gaussian_forecast(mu, sd):
    mu, sd = np.asarray(mu, float), np.asarray(sd, float)
    return QuantileForecast(LEVELS, mu + np.outer(stats.norm.ppf(LEVELS), sd))


def test_construct_increasing_median():
    fc = gaussian_forecast(np.arange(6.0), np.ones(6))
    bid = qbts_construct(fc, 0.25, UNIT)
    assert (bid.buy_hour, bid.sell_hour) == (0, 5)


def test_construct_limits_lookup():
    fc = gaussian_forecast([50, 100], [10, 10])
    bid = qbts_construct(fc, 0.25, BatteryConfig(kappa=10, eta=1.0, xi=10))
    assert bid.buy_limit == pytest.approx(50 + 10 * stats.norm.ppf(0.75))
    assert bid.sell_limit == pytest.approx(100 + 10 * stats.norm.ppf(0.25))
    assert (bid.buy_volume, bid.sell_volume) == (10.0, 10.0)


def test_construct_interpolates_and_limits_widen_as_alpha_shrinks():
    fc = gaussian_forecast([50, 100], [10, 10])
    wide = qbts_construct(fc, 0.1, UNIT)
    mid = qbts_construct(fc, 0.2, UNIT)
    assert wide.buy_limit > mid.buy_limit and wide.sell_limit < mid.sell_limit
    assert mid.buy_limit == pytest.approx(fc.quantile(0.8)[0])


def test_construct_errors():
    with pytest.raises(ValueError):
        qbts_construct(gaussian_forecast([1.0], [1.0]), 0.2, UNIT)
    with pytest.raises(ValueError):
        qbts_construct(gaussian_forecast([1.0, 2.0], [1.0, 1.0]), 0.5, UNIT)
    with pytest.raises(ValueError):
        QbtsBid(1, 1, 0.0, 0.0, 1, 1, 1, 0.2)


def test_unordered_variant_may_sell_first():
    fc = gaussian_forecast([100, 50, 60], np.ones(3))
    bid = qbts_construct(fc, 0.2, UNIT, ordered=False)
    assert (bid.buy_hour, bid.sell_hour) == (1, 0)
    assert qbts_construct(fc, 0.2, UNIT).buy_hour == 1


def _bid(limit_b=60.0, limit_s=90.0):
    return QbtsBid(0, 1, limit_b, limit_s, 10.0, 10.0, 1.0, 0.2)


def test_settle():
    assert qbts_settle(_bid(), PriceDay(np.array([70.0, 100.0]))).cash == 0.0
    out = qbts_settle(_bid(), PriceDay(np.array([50.0, 100.0])))
    assert out.accepted and out.cash == 500.0 and out.traded_mwh == 20.0
    assert qbts_settle(_bid(), PriceDay(np.array([60.0, 90.0]))).accepted
    with pytest.raises(ValueError):
        qbts_settle(QbtsBid(0, 3, 1, 1, 1, 1, 1, 0.2), PriceDay(np.array([1.0, 2.0])))


def test_ts1():
    med = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
    fc = QuantileForecast(np.array([0.2, 0.5, 0.8]), np.tile(med, (3, 1)))
    sched = ts1_construct(fc, 0.2, UNIT)
    bid = qbts_construct(fc, 0.2, UNIT)
    assert sched.buy[bid.buy_hour] > 0 and sched.sell[bid.sell_hour] > 0
    flat = QuantileForecast(np.array([0.2, 0.5, 0.8]), np.full((3, 4), 50.0))
    assert ts1_construct(flat, 0.2, BatteryConfig(1, 0.9, 1)).is_empty
    assert not ts1_construct(flat, 0.2, BatteryConfig(1, 0.9, 1), no_trade_filter=False).is_empty
    two = QuantileForecast(np.array([0.2, 0.8]), np.array([[40.0, 90.0], [60.0, 120.0]]))
    s2 = ts1_construct(two, 0.2, UNIT)
    assert s2.buy[0] == 1.0 and s2.sell[1] == 1.0


def test_ap_perfect_independent():
    spec = GaussianPriceSpec.independent([50, 100], 10)
    assert qbts_acceptance_probability(spec, spec, 0, 1, 0.2, "analytic-independent") == pytest.approx(0.64)
    mc = qbts_expected_profit(spec, spec, 0, 1, 0.2, UNIT, n_draws=200_000, seed=1)
    assert abs(mc.ap - 0.64) < 3 * mc.ap_se


def test_ap_correlation_reduces():
    ind = GaussianPriceSpec.independent([50, 100], 10)
    cor = GaussianPriceSpec.independent([50, 100], 10, rho=0.8)
    assert qbts_acceptance_probability(cor, cor, 0, 1, 0.2, n_draws=200_000) < 0.62
    with pytest.raises(ValueError, match="zero correlation"):
        qbts_acceptance_probability(cor, cor, 0, 1, 0.2, "analytic-independent")
    with pytest.raises(ValueError):
        qbts_acceptance_probability(ind, ind, 0, 1, 0.2, "series")


def test_ap_monotone_in_alpha():
    spec = GaussianPriceSpec.independent([50, 100], 10)
    aps = [qbts_acceptance_probability(spec, spec, 0, 1, a, "analytic-independent") for a in (0.05, 0.1, 0.2, 0.3, 0.45)]
    assert np.all(np.diff(aps) < 0)


def test_analytic_matches_monte_carlo():
    truth = GaussianPriceSpec.independent([50, 100], 10)
    fc = GaussianPriceSpec.independent([50, 100], 10, dispersion_b=1.5)
    cfg = BatteryConfig(kappa=2.0, eta=0.9, xi=2.0)
    a = qbts_expected_profit(truth, fc, 0, 1, 0.3, cfg, "analytic-independent")
    m = qbts_expected_profit(truth, fc, 0, 1, 0.3, cfg, n_draws=400_000, seed=3)
    assert abs(a.ap - m.ap) < 4 * m.ap_se
    assert abs(a.expected_profit - m.expected_profit) < 4 * m.profit_se
    assert a.expected_profit == pytest.approx(a.ap * a.ep)


def test_small_alpha_gives_unconditional_spread():
    spec = GaussianPriceSpec.independent([50, 100], 10)
    cfg = BatteryConfig(kappa=1.0, eta=0.9, xi=1.0)
    res = qbts_expected_profit(spec, spec, 0, 1, 1e-9, cfg, "analytic-independent")
    assert res.expected_profit == pytest.approx(0.9 * 100 - 50 / 0.9, rel=1e-6)


def test_zero_acceptance_gives_nan_ep():
    truth = GaussianPriceSpec.independent([50, 100], 1e-3)
    fc = GaussianPriceSpec.independent([0, 200], 1e-3)
    res = qbts_expected_profit(truth, fc, 0, 1, 0.2, UNIT, "analytic-independent")
    assert res.ap == 0.0 and np.isnan(res.ep) and res.expected_profit == 0.0


def test_gaming_and_common_random_numbers():
    truth = GaussianPriceSpec.independent([50, 100], 10)
    over = GaussianPriceSpec.independent([50, 100], 10, dispersion_b=1.5)
    diff, se = qbts_profit_difference(truth, over, truth, 0, 1, 0.3, UNIT, n_draws=200_000, seed=0)
    assert diff > 3 * se


def test_empirical_ap():
    ens = ScenarioEnsemble(np.array([[1.0, 5.0], [2.0, 6.0], [3.0, 2.0]]))
    assert empirical_acceptance_probability(ens, QbtsBid(0, 1, 10, 0, 1, 1, 1, 0.2)) == 1.0
    assert empirical_acceptance_probability(ens, QbtsBid(0, 1, 1.0, 6.0, 1, 1, 1, 0.2)) == 0.0
    assert empirical_acceptance_probability(ens, QbtsBid(0, 1, 2.0, 5.0, 1, 1, 1, 0.2)) == pytest.approx(2 / 3)


def test_empirical_ap_dependence(rng):
    from bessbench.simulate import CopulaKind, CopulaModel, MarginalModel, sample_with_reordering

    marg = MarginalModel(loc=np.array([50.0, 100.0]), scale=np.array([10.0, 10.0]))
    ind = sample_with_reordering(marg, CopulaModel.independent(2), 10_000, 0)
    com = sample_with_reordering(marg, CopulaModel(CopulaKind.EMPIRICAL, np.ones((2, 2))), 10_000, 0)
    bid = qbts_construct(QuantileForecast.from_ensemble(ind, LEVELS), 0.25, UNIT)
    assert empirical_acceptance_probability(ind, bid) >= empirical_acceptance_probability(com, bid)


def test_simulation_grid_shape_and_determinism():
    kw = dict(panels=[(50, 100, 10)], dispersions=[1.0, 1.5], alphas=[0.2], rhos=(0.0, 0.4), n_draws=2000, seed=7)
    rows = simulation_grid(**kw)
    assert len(rows) == 4 and rows == simulation_grid(**kw)
    with pytest.raises(ValueError, match="sigma"):
        simulation_grid([(50, 100, 0)], [1.0], [0.2])
