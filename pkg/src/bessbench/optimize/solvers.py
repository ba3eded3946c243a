"""Pluggable MILP backends behind one small interface.

All backends minimize ``c @ x`` subject to ``A_ub @ x <= b_ub``,
``A_eq @ x == b_eq``, ``lb <= x <= ub`` with integrality on a mask.

``embedded``
    Best-first branch and bound over the integer variables written here; LP
    relaxations go to HiGHS through ``scipy.optimize.linprog``.
``highs``
    ``scipy.optimize.milp`` (the HiGHS branch-and-cut solver in-process).
``lpfile``
    Writes the model as a CPLEX-LP file, runs an external command and reads
    a plain-text solution back (format in :mod:`bessbench.optimize.lpfile`).
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
GAP_TERMINATED = "gap-terminated"


@dataclass(frozen=True, eq=False)
class MilpProblem:
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    names: tuple[str, ...] = ()
    constant: float = 0.0

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class SolverOptions:
    backend: str = "embedded"
    mip_rel_gap: float = 1e-6
    feasibility_tol: float = 1e-9
    time_limit: float | None = None
    node_limit: int = 200_000
    command: tuple[str, ...] = ()
    workdir: str | None = None


@dataclass
class SolverResult:
    status: str
    x: np.ndarray | None
    fun: float
    gap: float
    nodes: int = 0
    info: dict = field(default_factory=dict)


def _linprog(c, prob: MilpProblem, lb, ub, tol: float):
    res = linprog(
        c,
        A_ub=prob.A_ub if prob.A_ub.size else None,
        b_ub=prob.b_ub if prob.A_ub.size else None,
        A_eq=prob.A_eq if prob.A_eq.size else None,
        b_eq=prob.b_eq if prob.A_eq.size else None,
        bounds=np.column_stack([lb, ub]),
        method="highs",
        options={"primal_feasibility_tolerance": max(tol, 1e-10), "dual_feasibility_tolerance": 1e-10},
    )
    return res


def polish(prob: MilpProblem, x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Re-solve the LP with integers fixed at their rounded values, at tight tolerance."""
    mask = prob.integrality.astype(bool)
    lb, ub = prob.lb.copy(), prob.ub.copy()
    fixed = np.round(x[mask])
    lb[mask] = fixed
    ub[mask] = fixed
    res = _linprog(prob.c, prob, lb, ub, tol)
    if res.status != 0:
        out = x.copy()
        out[mask] = fixed
        return out
    out = res.x.copy()
    out[mask] = fixed
    return out


def solve_highs(prob: MilpProblem, opts: SolverOptions) -> SolverResult:
    cons = []
    if prob.A_ub.size:
        cons.append(LinearConstraint(prob.A_ub, -np.inf, prob.b_ub))
    if prob.A_eq.size:
        cons.append(LinearConstraint(prob.A_eq, prob.b_eq, prob.b_eq))
    options = {"mip_rel_gap": opts.mip_rel_gap, "presolve": True}
    if opts.time_limit is not None:
        options["time_limit"] = opts.time_limit
    res = milp(prob.c, constraints=cons, integrality=prob.integrality, bounds=Bounds(prob.lb, prob.ub),
               options=options)
    if res.x is None:
        return SolverResult(INFEASIBLE, None, math.inf, math.inf)
    status = OPTIMAL if res.status == 0 else GAP_TERMINATED
    x = polish(prob, res.x, opts.feasibility_tol)
    gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
    return SolverResult(status, x, float(prob.c @ x), gap, int(getattr(res, "mip_node_count", 0) or 0))


def _rel_gap(incumbent: float, bound: float) -> float:
    if incumbent == math.inf:
        return math.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


def solve_branch_and_bound(prob: MilpProblem, opts: SolverOptions, incumbent: np.ndarray | None = None) -> SolverResult:
    """Best-first branch and bound, branching on the most fractional variable."""
    start = time.monotonic()
    mask = prob.integrality.astype(bool)
    int_idx = np.flatnonzero(mask)
    tol_int = 1e-7
    best_x, best_f = None, math.inf
    if incumbent is not None:
        best_x, best_f = incumbent.copy(), float(prob.c @ incumbent)

    counter = itertools.count()
    root = _linprog(prob.c, prob, prob.lb, prob.ub, opts.feasibility_tol)
    if root.status == 2:
        if best_x is not None:
            return SolverResult(OPTIMAL, best_x, best_f, 0.0, 1)
        return SolverResult(INFEASIBLE, None, math.inf, math.inf, 1)
    if root.status != 0:
        raise RuntimeError(f"LP relaxation failed: {root.message}")
    heap = [(root.fun, next(counter), prob.lb.copy(), prob.ub.copy(), root.x)]
    nodes = 1
    status = OPTIMAL
    while heap:
        bound, _, lb, ub, x = heap[0]
        if _rel_gap(best_f, bound) <= opts.mip_rel_gap:
            break
        if nodes >= opts.node_limit or (opts.time_limit is not None and time.monotonic() - start > opts.time_limit):
            status = GAP_TERMINATED
            break
        heapq.heappop(heap)
        frac = np.abs(x[int_idx] - np.round(x[int_idx]))
        j = int(np.argmax(frac))
        if frac[j] <= tol_int:
            if bound < best_f:
                best_x, best_f = x.copy(), bound
            continue
        var = int_idx[j]
        for lo, hi in ((math.floor(x[var]) + 1, ub[var]), (lb[var], math.floor(x[var]))):
            if lo > hi:
                continue
            nlb, nub = lb.copy(), ub.copy()
            nlb[var], nub[var] = lo, hi
            res = _linprog(prob.c, prob, nlb, nub, opts.feasibility_tol)
            nodes += 1
            if res.status != 0 or _rel_gap(best_f, res.fun) <= opts.mip_rel_gap or res.fun >= best_f:
                continue
            child_frac = np.abs(res.x[int_idx] - np.round(res.x[int_idx]))
            if child_frac.max(initial=0.0) <= tol_int:
                best_x, best_f = res.x.copy(), res.fun
                continue
            heapq.heappush(heap, (res.fun, next(counter), nlb, nub, res.x))
    if best_x is None:
        return SolverResult(INFEASIBLE if status == OPTIMAL else GAP_TERMINATED, None, math.inf, math.inf, nodes)
    lower = heap[0][0] if heap else best_f
    x = polish(prob, best_x, opts.feasibility_tol)
    fun = float(prob.c @ x)
    return SolverResult(status, x, fun, _rel_gap(fun, min(lower, fun)), nodes)


def solve(prob: MilpProblem, opts: SolverOptions | None = None, incumbent: np.ndarray | None = None) -> SolverResult:
    opts = opts or SolverOptions()
    if opts.backend == "embedded":
        return solve_branch_and_bound(prob, opts, incumbent)
    if opts.backend == "highs":
        return solve_highs(prob, opts)
    if opts.backend == "lpfile":
        from bessbench.optimize.lpfile import solve_external

        return solve_external(prob, opts)
    raise ValueError(f"unknown solver backend {opts.backend!r}")
