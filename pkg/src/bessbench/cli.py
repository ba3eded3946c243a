"""Command-line front end: ``bessbench <command> --config PATH``.

Results go to files under the output directory only; logging goes to
standard error.  Exit codes: 0 success, 1 invalid input or configuration,
2 failure while running.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from bessbench.config import ConfigError, ExperimentConfig, load_config
from bessbench.core import PriceDay, ScenarioEnsemble
from bessbench.evaluate import config_hash, cross_score, economic_measures, run_backtest
from bessbench.io import PriceFileError, load_ensemble_csv, load_price_csv, write_rows
from bessbench.qbts import SIM_COLUMNS, simulation_grid
from bessbench.scoring import (
    KendallMode,
    RankEnsemble,
    crps,
    dawid_sebastiani,
    energy_score,
    kendall_score,
    mpd_mhd,
    point_scores,
    rank_scores,
    variogram_score,
)
from bessbench.simulate import ClimatologyForecaster, NaiveBootstrapForecaster

log = logging.getLogger("bessbench")

MEASURE_COLUMNS = ("model", "risk", "days", "total_profit", "sharpe", "var_exceedance", "no_bid_days")


def _risk_tag(text: str) -> str:
    return text.replace(":", "_").replace(".", "p")


def _hash_payload(cfg: ExperimentConfig) -> dict:
    """Config content that can change results (worker count and output path cannot)."""
    data = cfg.to_dict()
    data.pop("jobs")
    data.pop("output_dir")
    return data


def _meta(cfg: ExperimentConfig) -> dict[str, str]:
    return {"config_hash": config_hash(_hash_payload(cfg))}


def _write_resolved(cfg: ExperimentConfig, out: Path) -> None:
    (out / "config.resolved.yaml").write_text(cfg.to_yaml(), encoding="utf-8")


# --------------------------------------------------------------------------
# simulation studies


def _sim(cfg: ExperimentConfig, out: Path, rhos) -> Path:
    rows = simulation_grid(cfg.panels, cfg.dispersions, cfg.alphas, rhos, cfg.battery,
                           cfg.n_draws, cfg.seed, jobs=cfg.workers)
    path = out / ("sim_qbts.csv" if cfg.kind == "sim-qbts" else "sim_correlation.csv")
    write_rows(path, SIM_COLUMNS, ([r[c] for c in SIM_COLUMNS] for r in rows), meta=_meta(cfg))
    return path


def cmd_sim_qbts(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Dispersion x alpha grid per panel at zero correlation."""
    return [_sim(cfg, out, (0.0,))]


def cmd_sim_correlation(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """The same grid repeated over the configured correlations."""
    return [_sim(cfg, out, cfg.rhos)]


# --------------------------------------------------------------------------
# data-driven commands


def _load_days(cfg: ExperimentConfig) -> tuple[list[PriceDay], list[PriceDay]]:
    days = load_price_csv(cfg.resolve(cfg.prices))
    if len(days) <= cfg.test_days:
        raise ConfigError(f"price file has {len(days)} days; need more than test_days={cfg.test_days}")
    return days[:-cfg.test_days], days[-cfg.test_days:]


def build_forecasts(cfg: ExperimentConfig, history: list[PriceDay], test: list[PriceDay]) -> dict[str, list[ScenarioEnsemble]]:
    """Per-model ensembles for the test days, aligned with ``test``.

    Seeds come from ``SeedSequence(seed, spawn_key=(model index, day index))``
    so each (model, day) draw is fixed regardless of run order.
    """
    out = {}
    for mi, spec in enumerate(cfg.models):
        if spec.kind == "ensemble_file":
            by_date = load_ensemble_csv(cfg.resolve(spec.path))
            missing = [d.date_tag.isoformat() for d in test if d.date_tag not in by_date]
            if missing:
                raise ConfigError(f"model {spec.name!r}: ensemble file lacks dates {missing[:10]}")
            out[spec.name] = [by_date[d.date_tag] for d in test]
            continue
        ensembles = []
        for di, day in enumerate(test):
            if spec.kind == "perfect":
                ensembles.append(ScenarioEnsemble(np.tile(day.prices, (spec.n_members, 1)), day.date_tag))
                continue
            seen = history + test[:di]
            seed = np.random.SeedSequence(cfg.seed, spawn_key=(mi, di))
            if spec.kind == "climatology":
                est = ClimatologyForecaster(spec.n_members).fit(seen)
                ensembles.append(est.sample(day.date_tag, np.random.default_rng(seed)))
            else:
                est = NaiveBootstrapForecaster(spec.n_members).fit(seen)
                ensembles.append(est.sample(day.date_tag, np.random.default_rng(seed)))
        out[spec.name] = ensembles
    return out


def _backtests(cfg: ExperimentConfig):
    history, test = _load_days(cfg)
    forecasts = build_forecasts(cfg, history, test)
    results = {}
    for text, risk in zip(cfg.risks, cfg.risk_specs):
        log.info("backtest %s over %d days and %d models", text, len(test), len(forecasts))
        results[text] = run_backtest(forecasts, test, cfg.battery, risk, cfg.method, cfg.solver, cfg.workers,
                                     hash_payload=_hash_payload(cfg))
    return test, forecasts, results


def cmd_backtest(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Per-day results per risk measure plus one economic-measures table."""
    _, _, results = _backtests(cfg)
    paths, rows = [], []
    for text, res in results.items():
        path = out / f"results_{_risk_tag(text)}.csv"
        res.write_csv(path)
        paths.append(path)
        for model, m in economic_measures(res, cfg.var_alpha).items():
            rows.append((model, text, m.days, m.total_profit, m.sharpe, m.var_exceedance, m.no_bid_days))
    path = out / "measures.csv"
    write_rows(path, MEASURE_COLUMNS, rows, meta=_meta(cfg))
    return paths + [path]


def day_scores(ens: ScenarioEnsemble, day: PriceDay, undefined: dict[str, str] | None = None) -> dict[str, float]:
    """Every daily score; scores undefined for this ensemble come back as NaN.

    The reason a score is undefined is stored in ``undefined`` by name.
    """
    out: dict[str, float] = {}

    def put(name, fn):
        try:
            val = fn()
        except ValueError as exc:
            log.debug("%s undefined on %s: %s", name, day.date_tag, exc)
            if undefined is not None:
                undefined.setdefault(name, str(exc))
            val = float("nan")
        if isinstance(val, dict):
            out.update({k: float(v) for k, v in val.items() if np.ndim(v) == 0})
        else:
            out[name] = float(val)

    put("point", lambda: point_scores(ens, day))
    put("CRPS", lambda: crps(ens, day))
    put("ES", lambda: energy_score(ens, day))
    put("VS_0.5", lambda: variogram_score(ens, day, 0.5))
    put("VS_1.0", lambda: variogram_score(ens, day, 1.0))
    put("DSS", lambda: dawid_sebastiani(ens, day))
    put("KS", lambda: kendall_score(ens, day, KendallMode.KERNEL))
    put("KS_as_written", lambda: kendall_score(ens, day, KendallMode.AS_WRITTEN))
    put("ranks", lambda: rank_scores(RankEnsemble.from_prices(ens, day)))
    put("extremes", lambda: mpd_mhd(ens.paths.mean(axis=0), day))
    return out


def cmd_score(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """Long per-day table and per-model means of all statistical scores."""
    history, test = _load_days(cfg)
    forecasts = build_forecasts(cfg, history, test)
    long_rows, summary_rows = [], []
    for model, ensembles in forecasts.items():
        per_score: dict[str, list[float]] = {}
        undefined: dict[str, str] = {}
        for ens, day in zip(ensembles, test):
            for name, val in day_scores(ens, day, undefined).items():
                long_rows.append((day.date_tag, model, name, val))
                per_score.setdefault(name, []).append(val)
        for name, reason in undefined.items():
            n_nan = int(np.sum(np.isnan(per_score.get(name, []))))
            log.warning("model %s: %s undefined on %d of %d days (%s)", model, name, n_nan, len(test), reason)
        for name, vals in per_score.items():
            arr = np.array(vals)
            summary_rows.append((model, name, float(np.mean(arr)) if np.all(np.isfinite(arr)) else float("nan")))
    p1, p2 = out / "scores_daily.csv", out / "scores.csv"
    write_rows(p1, ("date", "model", "score", "value"), long_rows, meta=_meta(cfg))
    write_rows(p2, ("model", "score", "value"), summary_rows, meta=_meta(cfg))
    return [p1, p2]


def cmd_cross_score(cfg: ExperimentConfig, out: Path) -> list[Path]:
    """One cross-score matrix per risk measure."""
    test, forecasts, results = _backtests(cfg)
    paths = []
    for text, res in results.items():
        matrix = cross_score(res, forecasts, test)
        path = out / f"cross_score_{_risk_tag(text)}.csv"
        matrix.write_csv(path, meta={"config_hash": res.config_hash, "score": matrix.score_name})
        paths.append(path)
    return paths


COMMANDS = {
    "sim-qbts": cmd_sim_qbts,
    "sim-correlation": cmd_sim_correlation,
    "backtest": cmd_backtest,
    "score": cmd_score,
    "cross-score": cmd_cross_score,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bessbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--jobs", type=int, help="worker processes (default: config value, else all CPUs)")
        p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
        p.add_argument("--summary", action="store_true", help="print written file paths on stdout")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        changes = {k: v for k, v in (("seed", args.seed), ("output_dir", args.out), ("jobs", args.jobs)) if v is not None}
        if changes:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **changes}, base_dir=cfg.base_dir)
        if cfg.kind != args.command:
            raise ConfigError(f"config kind {cfg.kind!r} does not match command {args.command!r}")
        out = Path(args.out) if args.out else cfg.resolve(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, PriceFileError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    try:
        paths = COMMANDS[args.command](cfg, out)
        _write_resolved(cfg, out)
    except (ConfigError, PriceFileError) as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001 - any failure while running maps to exit code 2
        log.error("run failed: %s: %s", type(exc).__name__, exc)
        return 2
    if args.summary:
        for p in paths:
            print(p)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
