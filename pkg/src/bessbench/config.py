"""Experiment configuration: one YAML file per run.

Relative paths are resolved against the directory of the config file.
Every field has a default except ``kind`` and ``seed``; the resolved
configuration (defaults included) is written next to each run's outputs.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from bessbench.core import BatteryConfig, RiskKind, RiskSpec
from bessbench.optimize.solvers import SolverOptions

KINDS = ("sim-qbts", "sim-correlation", "backtest", "score", "cross-score")
MODEL_KINDS = ("climatology", "naive_bootstrap", "ensemble_file", "perfect")
DEFAULT_PANELS = ((50.0, 100.0, 10.0), (90.0, 100.0, 20.0))


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class ModelSpec:
    """A forecasting model.

    ``climatology`` and ``naive_bootstrap`` are refit on all days before each
    target day; ``ensemble_file`` reads a ``date,member,hour,price`` CSV;
    ``perfect`` repeats the realized prices ``n_members`` times.
    """

    name: str
    kind: str
    path: str | None = None
    n_members: int = 500

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"model {self.name!r}: kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.kind == "ensemble_file" and not self.path:
            raise ConfigError(f"model {self.name!r}: ensemble_file needs a path")
        if self.n_members < 1:
            raise ConfigError(f"model {self.name!r}: n_members must be positive")


def parse_risk(text: str) -> RiskSpec:
    """``"expected_profit"`` or ``"cvar:<alpha>"``."""
    text = str(text).strip().lower()
    if text in ("expected_profit", "ep"):
        return RiskSpec.expected_profit()
    if text.startswith("cvar:"):
        try:
            return RiskSpec.cvar(float(text[5:]))
        except ValueError as exc:
            raise ConfigError(f"bad risk spec {text!r}: {exc}") from None
    raise ConfigError(f"risk must be 'expected_profit' or 'cvar:<alpha>', got {text!r}")


def format_risk(risk: RiskSpec) -> str:
    return "expected_profit" if risk.kind is RiskKind.EXPECTED_PROFIT else f"cvar:{risk.alpha!r}"


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    output_dir: str = "out"
    jobs: int | None = None
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    risks: tuple[str, ...] = ("expected_profit",)
    method: str = "dp"
    solver: SolverOptions = field(default_factory=SolverOptions)
    prices: str | None = None
    test_days: int = 28
    models: tuple[ModelSpec, ...] = ()
    var_alpha: float = 0.9
    panels: tuple[tuple[float, float, float], ...] = DEFAULT_PANELS
    dispersions: tuple[float, ...] = (0.5, 0.75, 1.0, 1.25, 1.5, 2.0)
    alphas: tuple[float, ...] = (0.05, 0.1, 0.2, 0.3, 0.4)
    rhos: tuple[float, ...] = (0.0, 0.4, 0.8)
    n_draws: int = 1_000_000
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.jobs is not None and (isinstance(self.jobs, bool) or not isinstance(self.jobs, int) or self.jobs < 1):
            raise ConfigError(f"jobs must be a positive integer or null, got {self.jobs!r}")
        if self.method not in ("dp", "milp"):
            raise ConfigError(f"method must be 'dp' or 'milp', got {self.method!r}")
        for r in self.risks:
            parse_risk(r)
        if self.test_days < 1 or self.n_draws < 1:
            raise ConfigError("test_days and n_draws must be positive")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ConfigError(f"model names must be unique, got {names}")
        for p in self.panels:
            if len(p) != 3:
                raise ConfigError(f"panels are (mu_b, mu_s, sigma) triples, got {p!r}")
            if p[2] <= 0:
                raise ConfigError(f"panel {tuple(p)} has non-positive sigma; quantiles are undefined")
        if self.kind in ("backtest", "score", "cross-score"):
            if not self.prices:
                raise ConfigError(f"{self.kind} needs a prices file")
            if not self.models:
                raise ConfigError(f"{self.kind} needs at least one model")
            for path in [self.prices] + [m.path for m in self.models if m.path]:
                if not self.resolve(path).is_file():
                    raise ConfigError(f"file not found: {self.resolve(path)}")

    @property
    def workers(self) -> int:
        """Worker processes: ``jobs``, or every available CPU when unset."""
        return self.jobs or os.cpu_count() or 1

    @property
    def risk_specs(self) -> tuple[RiskSpec, ...]:
        return tuple(parse_risk(r) for r in self.risks)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self) -> dict:
        """Plain mapping that :meth:`from_dict` turns back into an equal config."""
        out = {
            "kind": self.kind,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "jobs": self.jobs,
            "battery": dataclasses.asdict(self.battery),
            "risks": list(self.risks),
            "method": self.method,
            "solver": {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self.solver).items()},
            "prices": self.prices,
            "test_days": self.test_days,
            "models": [dataclasses.asdict(m) for m in self.models],
            "var_alpha": self.var_alpha,
            "panels": [list(p) for p in self.panels],
            "dispersions": list(self.dispersions),
            "alphas": list(self.alphas),
            "rhos": list(self.rhos),
            "n_draws": self.n_draws,
        }
        return out

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in data:
            raise ConfigError("seed is mandatory")
        if "kind" not in data:
            raise ConfigError("kind is mandatory")
        kw = dict(data)
        try:
            if "battery" in kw:
                kw["battery"] = BatteryConfig(**kw["battery"])
            if "solver" in kw:
                solver = dict(kw["solver"])
                if "command" in solver:
                    solver["command"] = tuple(solver["command"] or ())
                kw["solver"] = SolverOptions(**solver)
            if "models" in kw:
                kw["models"] = tuple(ModelSpec(**m) for m in kw["models"])
            for key in ("risks", "dispersions", "alphas", "rhos"):
                if key in kw:
                    kw[key] = tuple(kw[key])
            if "panels" in kw:
                kw["panels"] = tuple(tuple(float(v) for v in p) for p in kw["panels"])
            return cls(**kw, base_dir=base_dir)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return ExperimentConfig.from_dict(data or {}, base_dir=str(path.parent))
