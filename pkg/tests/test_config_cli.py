import subprocess
import sys

import numpy as np
import pytest
import yaml

from bessbench import cli
from bessbench.config import ConfigError, ExperimentConfig, load_config, parse_risk
from bessbench.core import RiskSpec, ScenarioEnsemble
from bessbench.io import read_meta, read_rows, write_ensemble_csv, write_price_csv
from tests.helpers import make_days

MODELS = [{"name": "clim", "kind": "climatology", "n_members": 40},
          {"name": "naive", "kind": "naive_bootstrap", "n_members": 40},
          {"name": "oracle", "kind": "perfect", "n_members": 5}]


@pytest.fixture
def workdir(tmp_path):
    write_price_csv(tmp_path / "prices.csv", make_days(30, seed=3))
    return tmp_path


def write_config(path, **fields):
    path.write_text(yaml.safe_dump(fields), encoding="utf-8")
    return path


def run(cfg_path, command=None, *extra):
    data = yaml.safe_load(cfg_path.read_text())
    return cli.main([command or data["kind"], "--config", str(cfg_path), *extra])


# configuration

def test_config_round_trip(workdir):
    path = write_config(workdir / "c.yaml", kind="backtest", seed=3, prices="prices.csv", models=MODELS,
                        risks=["expected_profit", "cvar:0.9"], battery={"kappa": 5.0, "eta": 0.9})
    cfg = load_config(path)
    again = ExperimentConfig.from_dict(yaml.safe_load(cfg.to_yaml()), base_dir=cfg.base_dir)
    assert again == cfg
    assert cfg.risk_specs == (RiskSpec.expected_profit(), RiskSpec.cvar(0.9))
    assert cfg.workers >= 1


@pytest.mark.parametrize("fields, match", [
    ({"kind": "backtest"}, "seed"),
    ({"seed": 1}, "kind"),
    ({"kind": "nope", "seed": 1}, "kind"),
    ({"kind": "sim-qbts", "seed": -1}, "seed"),
    ({"kind": "sim-qbts", "seed": 1, "colour": "red"}, "unknown"),
    ({"kind": "sim-qbts", "seed": 1, "panels": [[50, 100, 0]]}, "sigma"),
    ({"kind": "sim-qbts", "seed": 1, "jobs": 0}, "jobs"),
    ({"kind": "sim-qbts", "seed": 1, "risks": ["var:0.9"]}, "risk"),
    ({"kind": "backtest", "seed": 1, "prices": "missing.csv", "models": MODELS}, "not found"),
    ({"kind": "backtest", "seed": 1, "prices": "prices.csv"}, "model"),
    ({"kind": "backtest", "seed": 1, "prices": "prices.csv", "models": MODELS + MODELS[:1]}, "unique"),
    ({"kind": "backtest", "seed": 1, "prices": "prices.csv", "models": [{"name": "e", "kind": "ensemble_file"}]}, "path"),
])
def test_config_errors(workdir, fields, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write_config(workdir / "bad.yaml", **fields))


def test_parse_risk():
    assert parse_risk("CVaR:0.75") == RiskSpec.cvar(0.75)
    with pytest.raises(ConfigError):
        parse_risk("cvar:2")


# commands and exit codes

def test_sim_commands_and_correlation_consistency(workdir):
    common = dict(seed=4, n_draws=20_000, dispersions=[1.0], alphas=[0.2], output_dir="out")
    q = write_config(workdir / "q.yaml", kind="sim-qbts", **common)
    c = write_config(workdir / "c.yaml", kind="sim-correlation", **common)
    assert run(q) == 0 and run(c) == 0
    rows_q = read_rows(workdir / "out" / "sim_qbts.csv")
    rows_c = read_rows(workdir / "out" / "sim_correlation.csv")
    assert {r["mu_b"] for r in rows_q} == {"50.0", "90.0"}
    for r in rows_q:
        assert abs(float(r["ap"]) - 0.64) < 4 * np.sqrt(0.64 * 0.36 / 20_000)
    zero = [r for r in rows_c if float(r["rho"]) == 0.0]
    for a, b in zip(rows_q, zero):
        assert abs(float(a["ap"]) - float(b["ap"])) < 6 * np.sqrt(0.64 * 0.36 / 20_000)
    for panel in ("50.0", "90.0"):
        aps = [float(r["ap"]) for r in rows_c if r["mu_b"] == panel]
        assert aps == sorted(aps, reverse=True)
    assert (workdir / "out" / "config.resolved.yaml").is_file()


def test_backtest_perfect_foresight_gets_best_spread(workdir):
    cfg = write_config(workdir / "b.yaml", kind="backtest", seed=1, prices="prices.csv", test_days=5,
                       models=[MODELS[2]], battery={"kappa": 1.0, "eta": 1.0, "xi": 1.0})
    assert run(cfg) == 0
    rows = read_rows(workdir / "out" / "results_expected_profit.csv")
    for row, day in zip(rows, make_days(30, seed=3)[-5:]):
        p = day.prices
        best = max(p[s] - p[b] for b in range(24) for s in range(b + 1, 24))
        assert float(row["realized_return"]) == pytest.approx(max(best, 0.0))
    assert "config_hash" in read_meta(workdir / "out" / "measures.csv")


def test_score_on_exact_ensembles_is_zero(workdir):
    days = make_days(30, seed=3)
    write_ensemble_csv(workdir / "ens.csv", [ScenarioEnsemble(np.tile(d.prices, (3, 1)), d.date_tag) for d in days])
    cfg = write_config(workdir / "s.yaml", kind="score", seed=1, prices="prices.csv", test_days=4,
                       models=[{"name": "exact", "kind": "ensemble_file", "path": "ens.csv"}])
    assert run(cfg) == 0
    summary = {r["score"]: float(r["value"] or "nan") for r in read_rows(workdir / "out" / "scores.csv")}
    for name in ("MAE", "RMSE", "CRPS", "ES", "VS_0.5", "VS_1.0", "Brier_rank", "RPS", "MHD", "KS"):
        assert summary[name] == pytest.approx(0.0, abs=1e-9), name
    assert np.isnan(summary["DSS"])


def test_cross_score_identical_models_constant(workdir):
    models = [{"name": "a", "kind": "climatology", "n_members": 30}, {"name": "b", "kind": "climatology", "n_members": 30}]
    days = make_days(30, seed=3)
    rng = np.random.default_rng(0)
    ens = [ScenarioEnsemble(d.prices + rng.normal(0, 5, (30, 24)), d.date_tag) for d in days]
    write_ensemble_csv(workdir / "e.csv", ens)
    models = [{"name": "a", "kind": "ensemble_file", "path": "e.csv"}, {"name": "b", "kind": "ensemble_file", "path": "e.csv"}]
    cfg = write_config(workdir / "x.yaml", kind="cross-score", seed=1, prices="prices.csv", test_days=6,
                       models=models, risks=["cvar:0.8"])
    assert run(cfg) == 0
    vals = {float(r["score"]) for r in read_rows(workdir / "out" / "cross_score_cvar_0p8.csv")}
    assert len(vals) == 1


def test_exit_codes(workdir, monkeypatch):
    good = write_config(workdir / "g.yaml", kind="sim-qbts", seed=1, n_draws=100, dispersions=[1.0], alphas=[0.2])
    assert run(good, "backtest") == 1
    assert run(write_config(workdir / "bad.yaml", kind="sim-qbts")) == 1
    assert cli.main(["sim-qbts", "--config", str(workdir / "absent.yaml")]) == 1

    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(cli, "simulation_grid", boom)
    assert run(good) == 2


def test_overrides_and_summary(workdir, capsys):
    cfg = write_config(workdir / "g.yaml", kind="sim-qbts", seed=1, n_draws=100, dispersions=[1.0], alphas=[0.2])
    assert run(cfg, None, "--seed", "9", "--out", str(workdir / "o9"), "--jobs", "1", "--summary") == 0
    assert str(workdir / "o9" / "sim_qbts.csv") in capsys.readouterr().out
    assert load_config(workdir / "o9" / "config.resolved.yaml").seed == 9


@pytest.mark.parametrize("kind", ["sim-qbts", "sim-correlation", "backtest", "score", "cross-score"])
def test_reruns_are_byte_identical(workdir, kind):
    fields = dict(kind=kind, seed=5)
    if kind.startswith("sim"):
        fields.update(n_draws=5000, dispersions=[1.0, 1.5], alphas=[0.1, 0.3])
    else:
        fields.update(prices="prices.csv", test_days=3, models=MODELS[:2], risks=["expected_profit", "cvar:0.9"])
    cfg = write_config(workdir / "r.yaml", **fields)
    outs = []
    for tag, jobs in (("a", "1"), ("b", "2")):
        assert run(cfg, None, "--out", str(workdir / tag), "--jobs", jobs) == 0
        outs.append({p.name: p.read_bytes() for p in sorted((workdir / tag).iterdir()) if p.suffix == ".csv"})
    assert outs[0] == outs[1] and outs[0]


def test_console_entry_point_runs(workdir):
    cfg = write_config(workdir / "g.yaml", kind="sim-qbts", seed=1, n_draws=100, dispersions=[1.0], alphas=[0.2])
    proc = subprocess.run([sys.executable, "-m", "bessbench.cli", "sim-qbts", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == ""
