"""File bridge to external MILP solvers.

Model file: the CPLEX-LP subset below, always written as a minimization.

    \\ optional comment lines
    Minimize
     obj: 1.5 x0 - 2 x1 + 0 x2
    Subject To
     u0: 1 x0 + 1 x1 <= 3
     e0: 1 x0 - 1 x2 = 0
    Bounds
     0 <= x0 <= 1
     -inf <= x2 <= +inf
    Binaries
     x1
    Generals
     x3
    End

Every variable appears in ``Bounds``.  Solution file, one token pair per line:

    status optimal|infeasible|gap-terminated
    objective <value>
    <variable name> <value>
    ...

``SolverOptions.command`` is an argv list in which ``{lp}`` and ``{sol}``
are replaced with the model and solution paths.  Running this module as
``python -m bessbench.optimize.lpfile MODEL SOLUTION`` is a reference solver
that reads the model with :func:`read_lp` and solves it with HiGHS.
"""

from __future__ import annotations

import math
import re
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from bessbench.optimize.solvers import (
    INFEASIBLE,
    MilpProblem,
    SolverOptions,
    SolverResult,
    polish,
    solve_highs,
)


def _names(prob: MilpProblem) -> list[str]:
    return list(prob.names) if prob.names else [f"x{i}" for i in range(prob.n)]


def _expr(coefs: np.ndarray, names: list[str]) -> str:
    terms = [f"{'+' if v >= 0 else '-'} {_num(abs(v))} {names[j]}" for j, v in enumerate(coefs) if v != 0]
    if not terms:
        return f"0 {names[0]}"
    first = terms[0]
    return " ".join([first[2:] if first.startswith("+") else "-" + first[2:]] + terms[1:])


def _num(x: float) -> str:
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return repr(float(x))


def write_lp(prob: MilpProblem, path) -> None:
    names = _names(prob)
    lines = ["\\ bessbench battery model", "Minimize", f" obj: {_expr(prob.c, names)}", "Subject To"]
    for i, (row, rhs) in enumerate(zip(prob.A_ub, prob.b_ub)):
        lines.append(f" u{i}: {_expr(row, names)} <= {_num(rhs)}")
    for i, (row, rhs) in enumerate(zip(prob.A_eq, prob.b_eq)):
        lines.append(f" e{i}: {_expr(row, names)} = {_num(rhs)}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lines.append(f" {_num(prob.lb[j])} <= {name} <= {_num(prob.ub[j])}")
    integer = prob.integrality.astype(bool)
    binary = [names[j] for j in range(prob.n) if integer[j] and prob.lb[j] == 0 and prob.ub[j] == 1]
    general = [names[j] for j in range(prob.n) if integer[j] and names[j] not in binary]
    if binary:
        lines += ["Binaries", " " + " ".join(binary)]
    if general:
        lines += ["Generals", " " + " ".join(general)]
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_TERM = re.compile(r"([+-]?)\s*([0-9.eE+-]+|inf)\s+([A-Za-z_][\w\[\].]*)")


def _parse_expr(text: str, index: dict[str, int], n: int) -> np.ndarray:
    row = np.zeros(n)
    text = text.strip()
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse LP expression near {text[pos:pos + 30]!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        row[index[m.group(3)]] += sign * float(m.group(2))
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    return row


def read_lp(path) -> MilpProblem:
    """Parse a file written by :func:`write_lp`."""
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("\\")]
    sections: dict[str, list[str]] = {}
    current = None
    for ln in lines:
        key = ln.lower()
        if key in ("minimize", "subject to", "bounds", "binaries", "generals", "end"):
            current = key
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ValueError(f"content before the first section: {ln!r}")
        sections[current].append(ln)
    names = [ln.split("<=")[1].strip() for ln in sections.get("bounds", [])]
    index = {nm: j for j, nm in enumerate(names)}
    n = len(names)
    lb = np.array([float(ln.split("<=")[0]) for ln in sections["bounds"]])
    ub = np.array([float(ln.split("<=")[2]) for ln in sections["bounds"]])
    obj = sections["minimize"][0].split(":", 1)[1]
    c = _parse_expr(obj, index, n)
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for ln in sections.get("subject to", []):
        body = ln.split(":", 1)[1]
        if "<=" in body:
            lhs, rhs = body.rsplit("<=", 1)
            a_ub.append(_parse_expr(lhs, index, n))
            b_ub.append(float(rhs))
        else:
            lhs, rhs = body.rsplit("=", 1)
            a_eq.append(_parse_expr(lhs, index, n))
            b_eq.append(float(rhs))
    integrality = np.zeros(n)
    for sec in ("binaries", "generals"):
        for ln in sections.get(sec, []):
            for nm in ln.split():
                integrality[index[nm]] = 1
    return MilpProblem(
        c,
        np.array(a_ub).reshape(len(a_ub), n),
        np.array(b_ub),
        np.array(a_eq).reshape(len(a_eq), n),
        np.array(b_eq),
        lb,
        ub,
        integrality,
        tuple(names),
    )


def write_solution(path, result: SolverResult, names: list[str]) -> None:
    lines = [f"status {result.status}", f"objective {_num(result.fun)}"]
    if result.x is not None:
        lines += [f"{nm} {_num(v)}" for nm, v in zip(names, result.x)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_solution(path, names: list[str]) -> SolverResult:
    status, fun, values = INFEASIBLE, math.inf, {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        parts = ln.split()
        if len(parts) != 2:
            continue
        key, val = parts
        if key == "status":
            status = val
        elif key == "objective":
            fun = float(val)
        else:
            values[key] = float(val)
    if not values:
        return SolverResult(status, None, fun, math.inf)
    missing = [nm for nm in names if nm not in values]
    if missing:
        raise ValueError(f"solution file lacks values for {missing[:5]}")
    return SolverResult(status, np.array([values[nm] for nm in names]), fun, 0.0)


def solve_external(prob: MilpProblem, opts: SolverOptions) -> SolverResult:
    if not opts.command:
        raise ValueError("the lpfile backend needs SolverOptions.command")
    names = _names(prob)
    with tempfile.TemporaryDirectory(dir=opts.workdir) as tmp:
        lp, sol = Path(tmp) / "model.lp", Path(tmp) / "model.sol"
        write_lp(prob, lp)
        argv = [a.replace("{lp}", str(lp)).replace("{sol}", str(sol)) for a in opts.command]
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=opts.time_limit)
        if proc.returncode != 0:
            raise RuntimeError(f"external solver failed ({proc.returncode}): {proc.stderr.strip()[:500]}")
        res = read_solution(sol, names)
    if res.x is not None:
        res.x = polish(prob, res.x, opts.feasibility_tol)
        res.fun = float(prob.c @ res.x)
    return res


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m bessbench.optimize.lpfile MODEL.lp SOLUTION.sol", file=sys.stderr)
        return 2
    prob = read_lp(argv[0])
    write_solution(argv[1], solve_highs(prob, SolverOptions(backend="highs")), list(prob.names))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
