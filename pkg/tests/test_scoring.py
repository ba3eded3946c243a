import datetime as dt
import math

import numpy as np
import pytest
from scipy import stats

from bessbench.core import PriceDay, QuantileForecast, ScenarioEnsemble, ScoreSeries
from bessbench.scoring import (
    KendallMode,
    RankEnsemble,
    crps,
    dawid_sebastiani,
    dm_test,
    energy_score,
    joint_var_cvar_scores,
    kendall_score,
    kendall_tau_b,
    marginal_calibration,
    mpd_mhd,
    pinball_and_joint_var_cvar,
    point_scores,
    price_ranks,
    rank_scores,
    top_k_scores,
    variogram_score,
)


def ens(rows):
    return ScenarioEnsemble(np.asarray(rows, dtype=float))


def day(values):
    return PriceDay(np.asarray(values, dtype=float), dt.date(2024, 3, 4))


# point and ensemble scores

def test_point_scores():
    y = day([1.0, 2.0, 3.0])
    assert point_scores(ens([[1, 2, 3]] * 3), y) == {"MAE": 0.0, "RMSE": 0.0}
    assert point_scores(ens([[3, 4, 5]] * 3), y) == {"MAE": 2.0, "RMSE": 2.0}
    assert point_scores(ens([[0, 0], [4, 4]]), day([1, 1])) == {"MAE": 1.0, "RMSE": 1.0}


def test_crps_examples():
    assert crps(ens([[0.0], [1.0]]), day([0.5])) == pytest.approx(0.25)
    assert crps(ens([[2.0, 3.0]] * 4), day([2.0, 3.0])) == 0.0
    with pytest.raises(ValueError):
        crps(ens([[1.0]]), day([1.0]))


def test_crps_matches_naive_double_sum(rng):
    f = rng.normal(size=(9, 3))
    y = rng.normal(size=3)
    naive = np.mean([np.mean(np.abs(f[:, h] - y[h])) - 0.5 * np.mean(np.abs(f[:, h, None] - f[None, :, h]))
                     for h in range(3)])
    assert crps(ens(f), day(y)) == pytest.approx(naive)


def test_energy_score(rng):
    f = rng.normal(size=(20, 1))
    assert energy_score(ens(f), day([0.3])) == crps(ens(f), day([0.3]))
    g = rng.normal(size=(7, 4))
    y = rng.normal(size=4)
    naive = np.mean(np.linalg.norm(g - y, axis=1)) - 0.5 * np.mean(np.linalg.norm(g[:, None] - g[None], axis=2))
    assert energy_score(ens(g), day(y)) == pytest.approx(naive)
    assert energy_score(ens([[1.0, 2.0]] * 5), day([1.0, 2.0])) == 0.0


def test_variogram_score(rng):
    assert variogram_score(ens([[0, 0], [0, 2]]), day([0, 1]), 1.0) == 0.0
    y = day([1.0, 5.0, 2.0])
    assert variogram_score(ens([y.prices] * 3), y, 0.5) == pytest.approx(0.0, abs=1e-24)
    f = rng.normal(size=(10, 4))
    obs = rng.normal(size=4)
    assert variogram_score(ens(f + 7), day(obs + 7)) == pytest.approx(variogram_score(ens(f), day(obs)))
    with pytest.raises(ValueError):
        variogram_score(ens(f), day(obs), 0.0)


def test_dss_examples():
    # members (+-2, 0) and (0, +-1) with M = 4 have covariance diag(4, 1) * 4/3; rescale to get diag(4, 1)
    s = math.sqrt(3 / 4) * np.array([[2, 0], [-2, 0], [0, 1], [0, -1]]) * math.sqrt(2)
    f = ens(s)
    np.testing.assert_allclose(np.cov(f.paths, rowvar=False), np.diag([4.0, 1.0]))
    assert dawid_sebastiani(f, day([2.0, 1.0])) == pytest.approx(2 + math.log(4))
    assert dawid_sebastiani(f, day([0.0, 0.0])) == pytest.approx(math.log(4))


def test_dss_regularization_flag(rng):
    score, info = dawid_sebastiani(ens(rng.normal(size=(3, 5))), day(np.zeros(5)), return_info=True)
    assert info["regularized"] and np.isfinite(score)
    _, info = dawid_sebastiani(ens(rng.normal(size=(30, 5))), day(np.zeros(5)), return_info=True)
    assert not info["regularized"]
    with pytest.raises(ValueError, match="spread"):
        dawid_sebastiani(ens([[1.0, 2.0]] * 4), day([1.0, 2.0]))


def test_mpd_mhd():
    y = day([3.0, 1.0, 5.0, 2.0])
    assert mpd_mhd(y.prices, y) == {"MPD": 0.0, "MHD": 0.0}
    assert mpd_mhd([3.0, 1.0, 8.0, 2.0], y) == {"MPD": 3.0, "MHD": 0.0}
    assert mpd_mhd([1.0, 3.0, 2.0, 6.0], day([2.0, 1.0, 6.0, 3.0]))["MHD"] == 1 + 1
    assert mpd_mhd([6.0, 2.0, 0.5, 3.0], day([2.0, 1.0, 6.0, 3.0]))["MHD"] == 2 + 1


# Kendall

def test_kendall_tau_b_matches_scipy(rng):
    for _ in range(20):
        v = rng.integers(0, 4, 8).astype(float)
        w = rng.normal(size=8)
        assert kendall_tau_b(v, w) == pytest.approx(stats.kendalltau(v, w).statistic)
    assert kendall_tau_b([1, 3, 2], [1, 3, 2]) == 1.0


def test_kendall_score_modes():
    y = day([1.0, 3.0, 2.0, 5.0])
    same = ens([y.prices, y.prices * 2, y.prices + 1])
    assert kendall_score(same, y, KendallMode.AS_WRITTEN) == pytest.approx(-1.5)
    assert kendall_score(same, y, "kernel") == pytest.approx(0.0)
    with pytest.raises(ValueError, match="member 1"):
        kendall_score(ens([y.prices, np.ones(4)]), y, "kernel")
    with pytest.raises(ValueError, match="2024-03-04"):
        kendall_score(same, day(np.ones(4)), "kernel")
    with pytest.raises(ValueError):
        kendall_score(same, y, "other")


# calibration and joint score

def test_marginal_calibration(rng):
    levels = np.array([0.1, 0.5, 0.9])
    fc = QuantileForecast(levels, np.tile(stats.norm.ppf(levels)[:, None], (1, 24)))
    days = [day(rng.normal(size=24)) for _ in range(400)]
    mc = marginal_calibration([fc] * 400, days, levels)
    se = np.sqrt(levels * (1 - levels) / mc.count)
    assert np.all(np.abs(mc.mc) < 3 * se)
    big = QuantileForecast(np.array([0.5]), np.full((1, 24), 1e12))
    assert marginal_calibration([big], days[:1], [0.5]).mc[0] == -0.5
    assert len(mc.rows()) == 3


def test_joint_score_examples():
    out = pinball_and_joint_var_cvar(2.0, 2.0, 2.0, 0.1)
    assert out["pinball"] == 0.0
    assert out["joint"] == pytest.approx(-math.log1p(math.exp(2.0)))
    assert pinball_and_joint_var_cvar(0.0, -1.0, 10.0, 0.1)["pinball"] == pytest.approx(1.0)


def test_joint_score_independent_formula():
    v, e, y, a = -1.0, -2.0, -3.0, 0.1
    hit = 1.0
    g2 = math.exp(e) / (1 + math.exp(e))
    expected = (hit - a) * (v - y) + g2 * hit * (v - y) / a + g2 * (e - v) - math.log(1 + math.exp(e))
    assert pinball_and_joint_var_cvar(v, e, y, a)["joint"] == pytest.approx(expected)
    assert joint_var_cvar_scores([v], [e], [y], a)[0] == pytest.approx(expected)


def test_joint_score_errors():
    with pytest.raises(ValueError):
        pinball_and_joint_var_cvar(0.0, 1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        pinball_and_joint_var_cvar(0.0, -1.0, float("nan"), 0.1)


def test_joint_score_rewards_true_tail(rng):
    y = rng.normal(size=200_000)
    a = 0.1
    v = stats.norm.ppf(a)
    e = -stats.norm.pdf(v) / a
    true = joint_var_cvar_scores(np.full_like(y, v), np.full_like(y, e), y, a).mean()
    off = joint_var_cvar_scores(np.full_like(y, v + 0.3), np.full_like(y, e + 0.3), y, a).mean()
    assert true < off


# ranks

def test_price_ranks_tie_break():
    np.testing.assert_array_equal(price_ranks([5.0, 1.0, 5.0, 0.0]), [3, 2, 4, 1])


def test_rank_scores_perfect_and_transposition():
    perfect = RankEnsemble(np.array([[1, 2, 3]] * 4), np.array([1, 2, 3]))
    s = rank_scores(perfect, ks=(1,))
    assert s["Brier_rank"] == s["Brier_item"] == s["RPS"] == 0.0
    assert all(s[k] == 0.0 for k in ("Low-1", "High-1", "Low-High-1", "BESS-1"))
    swap = rank_scores(RankEnsemble(np.array([[2, 1, 3]]), np.array([1, 2, 3])), ks=(1,))
    assert swap["Brier_rank"] == pytest.approx(4 / 9)
    assert swap["RPS"] == pytest.approx(2 / 9)


def test_rank_scores_uniform_closed_form():
    k = 6
    cyc = np.array([np.roll(np.arange(1, k + 1), i) for i in range(k)])
    s = rank_scores(RankEnsemble(cyc, np.arange(1, k + 1)), ks=(1,))
    np.testing.assert_allclose(s["brier_rank"], (k - 1) / k**2)
    np.testing.assert_allclose(s["brier_item"], (k - 1) / k**2)


def test_brier_bounds(rng):
    for _ in range(20):
        r = np.array([rng.permutation(8) + 1 for _ in range(5)])
        s = rank_scores(RankEnsemble(r, rng.permutation(8) + 1), ks=(1, 2, 4))
        assert 0 <= s["Brier_rank"] <= 2 and 0 <= s["Brier_item"] <= 2 and s["RPS"] >= 0
        assert all(0 <= s[f"{n}-{k}"] <= 2 for n in ("Low", "High", "Low-High", "BESS") for k in (1, 2, 4))


def test_bess_event_requires_low_before_high():
    # observed: cheapest hour 3 comes after the dearest hour 0, so no tradable top hour
    obs = np.array([4, 2, 3, 1])
    fc_tradable = np.array([[1, 2, 3, 4]])
    s = top_k_scores(RankEnsemble(fc_tradable, obs), ks=(1,))
    assert s["BESS-1"] == pytest.approx(0.5)
    assert top_k_scores(RankEnsemble(obs[None], obs), ks=(1,))["BESS-1"] == 0.0
    with pytest.raises(ValueError):
        top_k_scores(RankEnsemble(obs[None], obs), ks=(3,))


def test_rank_ensemble_validation():
    with pytest.raises(ValueError):
        RankEnsemble(np.array([[1, 1, 3]]), np.array([1, 2, 3]))


# Diebold-Mariano

def test_dm_identical_series_degenerate():
    a = np.arange(40.0)
    res = dm_test(a, a)
    assert res.degenerate and math.isnan(res.p_value)


def test_dm_rejects_clear_difference(rng):
    a = rng.normal(size=100)
    b = a + 1 + rng.normal(0, 0.1, 100)
    res = dm_test(ScoreSeries("a", "CRPS", a), ScoreSeries("b", "CRPS", b), "greater")
    assert res.statistic < -50 and res.p_value < 1e-10
    assert dm_test(b, a).statistic == pytest.approx(-res.statistic)
    assert dm_test(a, b, "less").p_value > 0.99


def test_dm_hac_and_errors(rng):
    a, b = rng.normal(size=50), rng.normal(size=50)
    assert np.isfinite(dm_test(a, b, lags=3).statistic)
    with pytest.raises(ValueError):
        dm_test(a, b[:10])
    with pytest.raises(ValueError):
        dm_test(a, b, "sideways")
    with pytest.raises(ValueError):
        dm_test(np.append(a[:-1], np.nan), b)


def test_dm_uniform_under_null():
    rng = np.random.default_rng(2024)
    p = [dm_test(rng.normal(size=100), rng.normal(size=100)).p_value for _ in range(1000)]
    assert stats.kstest(p, "uniform").pvalue > 0.01
