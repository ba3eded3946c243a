"""Battery arbitrage as a mixed-integer linear program.

Variable layout: ``a_buy[0:K]``, ``a_sell[K:2K]``, ``z_buy[2K:3K]``,
``z_sell[3K:4K]`` and, for CVaR, ``zeta`` followed by ``u[0:M]``.
The model is built as a minimization of the negated risk measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bessbench._validation import FEAS_TOL
from bessbench.core import BatteryConfig, BidSchedule, RiskKind, RiskSpec, ScenarioEnsemble, validate_bid_schedule
from bessbench.optimize import solvers
from bessbench.optimize.dp import dp_optimize
from bessbench.optimize.risk import risk_measure, var_cvar
from bessbench.optimize.solvers import MilpProblem, SolverOptions


@dataclass(frozen=True)
class MilpSolution:
    schedule: BidSchedule
    objective: float
    status: str
    gap: float
    nodes: int = 0


def build_problem(forecast: ScenarioEnsemble, config: BatteryConfig, risk: RiskSpec) -> MilpProblem:
    f = forecast.paths
    m, k = f.shape
    eta, xi, kappa = config.eta, config.xi, config.kappa
    cvar = risk.kind is RiskKind.CVAR
    n = 4 * k + (1 + m if cvar else 0)
    ab, as_, zb, zs = (slice(i * k, (i + 1) * k) for i in range(4))

    c = np.zeros(n)
    if cvar:
        t = (1.0 - risk.alpha) * m
        c[4 * k] = -1.0
        c[4 * k + 1:] = 1.0 / t
    else:
        mean = f.mean(axis=0)
        c[ab] = mean / eta
        c[as_] = -eta * mean

    rows, rhs = [], []

    def add(row, b):
        rows.append(row)
        rhs.append(b)

    for h in range(k):
        r = np.zeros(n); r[ab][h] = 1.0; r[zb][h] = -xi / eta; add(r, 0.0)
        r = np.zeros(n); r[as_][h] = 1.0; r[zs][h] = -eta * xi; add(r, 0.0)
        r = np.zeros(n); r[zb][h] = 1.0; r[zs][h] = 1.0; add(r, 1.0)
    r = np.zeros(n); r[zb] = 1.0; add(r, float(config.n_buy))
    r = np.zeros(n); r[zs] = 1.0; add(r, float(config.n_sell))
    prefix = np.tril(np.ones((k, k)))
    for h in range(k):
        r = np.zeros(n); r[ab] = eta * prefix[h]; r[as_] = -prefix[h] / eta; add(r, kappa)
        add(-r, 0.0)
    r = np.zeros(n); r[ab] = eta; add(r, config.cycles * kappa)
    if cvar:
        # zeta - R_m - u_m <= 0 with R_m = sum_h (-a_b/eta + a_s*eta) F_hm
        for j in range(m):
            r = np.zeros(n)
            r[4 * k] = 1.0
            r[ab] = f[j] / eta
            r[as_] = -eta * f[j]
            r[4 * k + 1 + j] = -1.0
            add(r, 0.0)
    a_ub = np.vstack(rows)
    b_ub = np.array(rhs)
    a_eq = np.zeros((1, n))
    a_eq[0, ab] = eta
    a_eq[0, as_] = -1.0 / eta

    lb = np.zeros(n)
    ub = np.concatenate([np.full(k, xi / eta), np.full(k, eta * xi), np.ones(2 * k)])
    integrality = np.concatenate([np.zeros(2 * k), np.ones(2 * k)])
    names = [f"buy{h}" for h in range(k)] + [f"sell{h}" for h in range(k)]
    names += [f"zb{h}" for h in range(k)] + [f"zs{h}" for h in range(k)]
    if cvar:
        lb = np.concatenate([lb[:4 * k], [-np.inf], np.zeros(m)])
        ub = np.concatenate([ub, [np.inf], np.full(m, np.inf)])
        integrality = np.concatenate([integrality, np.zeros(1 + m)])
        names += ["zeta"] + [f"u{j}" for j in range(m)]
    return MilpProblem(c, a_ub, b_ub, a_eq, np.zeros(1), lb, ub, integrality, tuple(names))


def _decode(x: np.ndarray, k: int) -> BidSchedule:
    buy = np.where(x[:k] > FEAS_TOL / 10, x[:k], 0.0)
    sell = np.where(x[k:2 * k] > FEAS_TOL / 10, x[k:2 * k], 0.0)
    return BidSchedule(buy, sell)


def milp_optimize(forecast: ScenarioEnsemble, config: BatteryConfig, risk: RiskSpec,
                  solver_opts: SolverOptions | None = None) -> MilpSolution:
    """Maximize expected profit or CVaR over multi-bid schedules.

    Objectives within the MIP gap of zero return the empty schedule, which
    is always feasible.
    """
    opts = solver_opts or SolverOptions()
    k = forecast.hours
    prob = build_problem(forecast, config, risk)
    incumbent = None
    if opts.backend == "embedded":
        single = BatteryConfig(config.kappa, config.eta, config.xi, config.cycles, 1, 1)
        sched, _, _ = dp_optimize(forecast, single, risk)
        incumbent = _incumbent(sched, forecast, config, risk)
    res = solvers.solve(prob, opts, incumbent)
    if res.x is None:
        return MilpSolution(BidSchedule.zeros(k), 0.0, res.status, res.gap, res.nodes)
    schedule = _decode(res.x, k)
    objective = _objective(schedule, forecast, config, risk)
    if objective <= opts.mip_rel_gap * max(1.0, abs(objective)) or schedule.is_empty:
        return MilpSolution(BidSchedule.zeros(k), 0.0, res.status, res.gap, res.nodes)
    report = validate_bid_schedule(schedule, config)
    if not report.ok:
        raise RuntimeError(f"solver returned an infeasible schedule: {report.violations}")
    return MilpSolution(schedule, objective, res.status, res.gap, res.nodes)


def _objective(schedule: BidSchedule, forecast: ScenarioEnsemble, config: BatteryConfig, risk: RiskSpec) -> float:
    return risk_measure(forecast.paths @ schedule.net_position(config.eta), risk)


def _incumbent(schedule: BidSchedule, forecast: ScenarioEnsemble, config: BatteryConfig, risk: RiskSpec) -> np.ndarray:
    parts = [schedule.buy, schedule.sell, (schedule.buy > 0).astype(float), (schedule.sell > 0).astype(float)]
    if risk.kind is RiskKind.CVAR:
        returns = forecast.paths @ schedule.net_position(config.eta)
        zeta = var_cvar(returns, risk.alpha)[0]
        parts += [[zeta], np.clip(zeta - returns, 0.0, None)]
    return np.concatenate(parts).astype(float)
