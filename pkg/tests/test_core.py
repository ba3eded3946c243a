import numpy as np
import pytest

from bessbench.core import (
    BatteryConfig,
    BidSchedule,
    GaussianPriceSpec,
    PriceDay,
    QuantileForecast,
    RiskKind,
    RiskSpec,
    ScenarioEnsemble,
    ScoreSeries,
    realized_return,
    validate_bid_schedule,
)


# realized_return oracles ------------------------------------------------------

def test_zero_schedule_returns_zero():
    assert realized_return(BidSchedule.zeros(24), PriceDay(np.arange(24.0)), 0.9) == 0.0


def test_round_trip_lossless():
    s = BidSchedule.pair(2, 0, 1, 10.0, 10.0)
    assert realized_return(s, PriceDay(np.array([10.0, 50.0])), 1.0) == pytest.approx(400.0)


def test_round_trip_with_losses():
    s = BidSchedule.pair(2, 0, 1, 10.0, 10.0)
    expected = -(1 / 0.95) * 10 * 10 + 0.95 * 10 * 50
    assert realized_return(s, PriceDay(np.array([10.0, 50.0])), 0.95) == pytest.approx(expected)
    assert expected == pytest.approx(369.7368421, abs=1e-6)


def test_realized_return_linear_in_prices(rng):
    s = BidSchedule.pair(24, 3, 17, 10 / 0.9, 9.0)
    p, q = rng.normal(50, 10, 24), rng.normal(0, 30, 24)
    lhs = realized_return(s, p + q, 0.9)
    assert lhs == pytest.approx(realized_return(s, p, 0.9) + realized_return(s, q, 0.9))


def test_limit_schedule_rejected():
    s = BidSchedule(np.array([1.0, 0.0]), np.array([0.0, 1.0]), buy_limit=np.array([5.0, 1e9]))
    with pytest.raises(ValueError, match="qbts"):
        realized_return(s, np.array([1.0, 2.0]), 1.0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        realized_return(BidSchedule.zeros(3), np.zeros(4), 1.0)


# validate_bid_schedule oracles -------------------------------------------------

def test_zero_schedule_valid():
    assert validate_bid_schedule(BidSchedule.zeros(24), BatteryConfig()).ok


def test_single_cycle_valid():
    eta = 1.0
    buy, sell = np.zeros(24), np.zeros(24)
    buy[5], sell[9] = 10.0, 10.0 * eta**2
    report = validate_bid_schedule(BidSchedule(buy, sell), BatteryConfig(kappa=10, eta=eta, xi=10, cycles=1))
    assert report.ok
    assert report.terminal_balance == pytest.approx(0.0)


def test_sell_before_buy_fails_charge_limits():
    buy, sell = np.zeros(24), np.zeros(24)
    buy[5], sell[3] = 10.0, 10.0
    report = validate_bid_schedule(BidSchedule(buy, sell), BatteryConfig(kappa=10, eta=1.0, xi=10))
    assert not report.ok
    assert "charge limits" in report.families()
    hit = [v for v in report.violations if v.family == "charge limits"]
    assert hit[0].hour == 3


def test_families_detected():
    cfg = BatteryConfig(kappa=10, eta=1.0, xi=5, cycles=1, n_buy=1, n_sell=1)
    buy, sell = np.zeros(6), np.zeros(6)
    buy[0] = buy[1] = 6.0  # above power, two buy bids
    sell[3] = sell[4] = 2.0
    fams = validate_bid_schedule(BidSchedule(buy, sell), cfg).families()
    assert {"bid limits", "number of buy bids", "number of sell bids", "charge limits", "terminal balance"} <= fams


def test_simultaneous_buy_and_sell():
    s = BidSchedule(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    assert "no simultaneous buy and sell" in validate_bid_schedule(s, BatteryConfig(eta=1.0)).families()


def test_cycle_limit_uses_cycle_count():
    buy = np.array([10.0, 0, 10.0, 0])
    sell = np.array([0, 10.0, 0, 10.0])
    cfg1 = BatteryConfig(kappa=10, eta=1.0, xi=10, cycles=1, n_buy=2, n_sell=2)
    cfg2 = BatteryConfig(kappa=10, eta=1.0, xi=10, cycles=2, n_buy=2, n_sell=2)
    assert "cycle limit" in validate_bid_schedule(BidSchedule(buy, sell), cfg1).families()
    assert validate_bid_schedule(BidSchedule(buy, sell), cfg2).ok


def test_validate_dimension_mismatch():
    with pytest.raises(ValueError):
        validate_bid_schedule(BidSchedule.zeros(4), BatteryConfig(), hours=24)


def test_validator_matches_independent_reimplementation(rng):
    cfg = BatteryConfig(kappa=5, eta=0.9, xi=3, cycles=2, n_buy=3, n_sell=3)
    for _ in range(300):
        buy = np.where(rng.random(8) < 0.3, rng.uniform(0, 4, 8), 0.0)
        sell = np.where((rng.random(8) < 0.3) & (buy == 0), rng.uniform(0, 4, 8), 0.0)
        level = np.cumsum(cfg.eta * buy - sell / cfg.eta)
        ok = (
            np.all(buy <= cfg.xi / cfg.eta + 1e-9) and np.all(sell <= cfg.eta * cfg.xi + 1e-9)
            and np.count_nonzero(buy) <= cfg.n_buy and np.count_nonzero(sell) <= cfg.n_sell
            and np.all(level >= -1e-9) and np.all(level <= cfg.kappa + 1e-9)
            and abs(level[-1]) <= 1e-9 and cfg.eta * buy.sum() <= cfg.cycles * cfg.kappa + 1e-9
        )
        assert validate_bid_schedule(BidSchedule(buy, sell), cfg).ok == ok


def test_constant_prices_lose_money_with_losses(rng):
    cfg = BatteryConfig(kappa=10, eta=0.9, xi=10)
    s = BidSchedule.pair(24, 2, 8, 10 / 0.9, 9.0)
    assert validate_bid_schedule(s, cfg).ok
    assert realized_return(s, np.full(24, 37.0), cfg.eta) <= 0
    s1 = BidSchedule.pair(24, 2, 8, 10.0, 10.0)
    assert realized_return(s1, np.full(24, 37.0), 1.0) == pytest.approx(0.0)


# types ---------------------------------------------------------------------------

def test_battery_config_validation():
    for kw in ({"kappa": 0}, {"eta": 0}, {"eta": 1.1}, {"xi": -1}, {"cycles": 0}, {"n_buy": 0}):
        with pytest.raises(ValueError):
            BatteryConfig(**kw)
    cfg = BatteryConfig.from_duration(kappa=20, duration=4)
    assert cfg.xi == 5 and cfg.duration == 4


def test_price_day_rejects_nonfinite():
    with pytest.raises(ValueError):
        PriceDay(np.array([1.0, np.nan]))
    assert PriceDay(np.array([-5.0, 0.0])).hours == 2


def test_quantile_forecast_interpolates_and_refuses_extrapolation():
    qf = QuantileForecast(np.array([0.1, 0.5, 0.9]), np.array([[0.0, 10.0], [1.0, 20.0], [3.0, 40.0]]))
    np.testing.assert_allclose(qf.quantile(0.7), [2.0, 30.0])
    with pytest.raises(ValueError):
        qf.quantile(0.95)
    with pytest.raises(ValueError):
        QuantileForecast(np.array([0.1, 0.5]), np.array([[2.0], [1.0]]))


def test_gaussian_spec():
    spec = GaussianPriceSpec.independent([90, 100], 20, dispersion_b=1.5, rho=0.4)
    np.testing.assert_allclose(spec.std, [30, 30])
    assert spec.correlation(0, 1) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        GaussianPriceSpec(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        GaussianPriceSpec.independent([0, 0], 1, dispersion_b=0)


def test_risk_spec():
    assert RiskSpec.expected_profit().kind is RiskKind.EXPECTED_PROFIT
    assert RiskSpec.cvar(0.9).alpha == 0.9
    for a in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            RiskSpec.cvar(a)


def test_ensemble_and_scores_validation():
    with pytest.raises(ValueError):
        ScenarioEnsemble(np.array([[1.0, np.inf]]))
    with pytest.raises(ValueError):
        ScoreSeries("m", "crps", np.array([1.0, np.nan]))
    assert len(ScoreSeries("m", "crps", np.arange(3.0))) == 3
