"""Battery optimizers: single-pair enumeration, the MILP and a brute-force oracle."""

from __future__ import annotations

import numpy as np

from bessbench.core import BidSchedule, ScenarioEnsemble
from bessbench.optimize.brute import brute_force_optimize
from bessbench.optimize.dp import PairValueTable, dp_optimize, pair_returns, pair_volumes
from bessbench.optimize.milp import MilpSolution, build_problem, milp_optimize
from bessbench.optimize.risk import cvar_lp_value, risk_measure, risk_measure_rows, var_cvar
from bessbench.optimize.solvers import MilpProblem, SolverOptions, SolverResult, solve


def predicted_objective_distribution(forecast: ScenarioEnsemble, schedule: BidSchedule, eta: float) -> np.ndarray:
    """Return of a fixed schedule against every scenario path, shape ``(M,)``."""
    if schedule.hours != forecast.hours:
        raise ValueError(f"schedule has {schedule.hours} hours, forecast has {forecast.hours}")
    return forecast.paths @ schedule.net_position(eta)


__all__ = [
    "MilpProblem",
    "MilpSolution",
    "PairValueTable",
    "SolverOptions",
    "SolverResult",
    "brute_force_optimize",
    "build_problem",
    "cvar_lp_value",
    "dp_optimize",
    "milp_optimize",
    "pair_returns",
    "pair_volumes",
    "predicted_objective_distribution",
    "risk_measure",
    "risk_measure_rows",
    "solve",
    "var_cvar",
]
