"""Linear/integer model builder with an internal exact solver and an
LP-file bridge to external solvers."""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from pathlib import Path

from .bnb import SolverError, branch_and_bound
from .highs import solve_highs
from .lpformat import (LPParseError, SolutionParseError, emit_lp, format_solution,
                       parse_lp, parse_solution, read_lp, write_lp)
from .model import (FEAS_TOL, Constraint, Model, ModelError, Solution, Variable)

SOLVER_ENV = "MULGEN_SOLVER"
SOLVER_KEY = "solver_path"
BACKENDS = ("internal", "bnb", "external")

__all__ = [
    "Model", "Variable", "Constraint", "Solution", "ModelError", "SolverError",
    "SolverNotFoundError", "LPParseError", "SolutionParseError",
    "emit_lp", "parse_lp", "read_lp", "write_lp", "parse_solution", "format_solution",
    "solve", "branch_and_bound", "solve_highs", "BACKENDS", "SOLVER_ENV",
]


class SolverNotFoundError(SolverError):
    pass


def _resolve_solver(solver_path: str | None) -> str:
    path = solver_path or os.environ.get(SOLVER_ENV)
    if not path:
        raise SolverNotFoundError(
            f"external backend needs a solver executable: set '{SOLVER_KEY}' in the "
            f"config file or the {SOLVER_ENV} environment variable")
    found = shutil.which(path) or (path if Path(path).is_file() else None)
    if not found:
        raise SolverNotFoundError(
            f"solver executable {path!r} (from '{SOLVER_KEY}'/{SOLVER_ENV}) not found")
    return found


def solve_external(model: Model, solver_path: str | None = None,
                   time_limit: float | None = None) -> Solution:
    """Run ``<solver> model.lp model.sol [time_limit]`` and read the ``.sol`` file."""
    exe = _resolve_solver(solver_path)
    with tempfile.TemporaryDirectory(prefix="mulgen-ilp-") as tmp:
        lp = write_lp(model, Path(tmp) / "model.lp")
        sol_path = Path(tmp) / "model.sol"
        cmd = [exe, str(lp), str(sol_path)]
        if time_limit is not None:
            cmd.append(repr(float(time_limit)))
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True,
                                  timeout=None if time_limit is None else time_limit + 60)
        except subprocess.TimeoutExpired:
            return Solution("timeout", message="external solver did not return")
        if proc.returncode != 0 and not sol_path.exists():
            raise SolverError(
                f"external solver exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")
        if not sol_path.exists():
            return Solution("infeasible", message="no solution file written")
        sol = parse_solution(sol_path.read_text())
    if sol.has_values:
        unknown = set(sol.values) - set(model.variables)
        if unknown:
            raise SolutionParseError(f"solution names unknown variables: {sorted(unknown)[:5]}")
        missing = [n for n in model.variables if n not in sol.values]
        for n in missing:
            # solvers commonly omit zero-valued variables
            sol.values[n] = 0.0
        sol.objective = model.objective_value(sol.values)
    return sol


def solve(model: Model, time_limit: float | None = None, backend: str = "internal", *,
          solver_path: str | None = None, initial: dict | None = None,
          node_limit: int | None = None, mip_gap: float = 1e-9, priority=None) -> Solution:
    """Solve ``model`` and re-check the returned point against every row.

    ``internal`` is HiGHS through scipy; ``bnb`` is the small pure
    branch-and-bound kept as an independent cross-check.
    """
    if backend == "internal":
        sol = solve_highs(model, time_limit, initial=initial, mip_gap=mip_gap,
                          node_limit=node_limit)
    elif backend == "bnb":
        sol = branch_and_bound(model, time_limit=time_limit, node_limit=node_limit,
                               initial=initial, mip_gap=mip_gap, priority=priority)
    elif backend == "external":
        sol = solve_external(model, solver_path, time_limit)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if sol.has_values:
        bad = model.check(sol.values, FEAS_TOL)
        if bad:
            raise SolverError(f"solver returned an infeasible point; violated: {bad[:5]}")
    return sol
