"""Mixed-integer solve through HiGHS as bundled with scipy."""

from __future__ import annotations

import logging

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .model import FEAS_TOL, Model, Solution

log = logging.getLogger(__name__)


def solve_highs(model: Model, time_limit: float | None = None,
                initial: dict | None = None, mip_gap: float = 1e-9,
                node_limit: int | None = None) -> Solution:
    """Solve with HiGHS branch-and-cut.

    HiGHS takes no warm start through scipy, so a feasible ``initial`` point
    is kept as a fallback incumbent when the limit hits first.
    """
    if not model.variables:
        return Solution("optimal", {}, model.objective_constant)
    arr = model.to_arrays()
    cons = []
    if arr.A_ub is not None:
        cons.append(LinearConstraint(arr.A_ub, -np.inf, arr.b_ub))
    if arr.A_eq is not None:
        cons.append(LinearConstraint(arr.A_eq, arr.b_eq, arr.b_eq))
    options = {"mip_rel_gap": mip_gap, "disp": False}
    if time_limit is not None:
        options["time_limit"] = max(float(time_limit), 0.01)
    if node_limit is not None:
        options["node_limit"] = int(node_limit)
    res = milp(arr.c, constraints=cons, integrality=arr.integral.astype(int),
               bounds=Bounds(arr.lb, arr.ub), options=options)

    fallback = None
    if initial is not None and all(n in initial for n in arr.names):
        if model.max_violation(initial) <= FEAS_TOL:
            fallback = {n: float(initial[n]) for n in arr.names}

    values = None
    if res.x is not None:
        values = {}
        for name, val, integral in zip(arr.names, res.x.tolist(), arr.integral):
            values[name] = float(round(val)) if integral else float(val)
        if model.max_violation(values) > FEAS_TOL:
            values = None
    bound = getattr(res, "mip_dual_bound", None)
    bound = None if bound is None or not np.isfinite(bound) else arr.sign * bound + arr.c0

    if res.status == 0 and values is not None:
        status = "optimal"
    elif res.status == 2:
        return Solution("infeasible", message=res.message)
    elif res.status == 3:
        raise ValueError("model is unbounded")
    else:
        status = "feasible"
        if fallback is not None and (
                values is None
                or arr.sign * model.objective_value(fallback) < arr.sign * model.objective_value(values)):
            values = fallback
        if values is None:
            return Solution("timeout", bound=bound, message=res.message)
    sol = Solution(status, values, model.objective_value(values), bound,
                   message=res.message)
    log.debug("highs %s: status=%s obj=%s bound=%s", model.name, status, sol.objective, bound)
    return sol
