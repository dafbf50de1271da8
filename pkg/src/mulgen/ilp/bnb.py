"""LP-based branch-and-bound for small mixed-integer models.

Relaxations are solved with HiGHS through :func:`scipy.optimize.linprog`.
Search is best-bound with depth-first plunging; a time or node limit
returns the incumbent.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .model import FEAS_TOL, Model, ModelArrays, ModelError, Solution

log = logging.getLogger(__name__)

INT_TOL = 1e-6


class SolverError(RuntimeError):
    pass


def _objective_step(arr: ModelArrays) -> float | None:
    """Granularity of the objective over integer points, if any.

    When every objective coefficient sits on an integral variable and is a
    rational multiple of a common step, LP bounds can be rounded up to
    that step.
    """
    nz = np.flatnonzero(arr.c)
    if len(nz) == 0:
        return None
    if not arr.integral[nz].all():
        return None
    fracs = []
    for c in arr.c[nz]:
        f = Fraction(float(c)).limit_denominator(10**6)
        if abs(float(f) - c) > 1e-12:
            return None
        fracs.append(abs(f))
    num = 0
    den = 1
    for f in fracs:
        den = den * f.denominator // math.gcd(den, f.denominator)
    for f in fracs:
        num = math.gcd(num, int(f * den))
    return num / den if num else None


class _Search:
    def __init__(self, model: Model, time_limit, node_limit, mip_gap, priority):
        self.model = model
        self.arr = model.to_arrays()
        self.deadline = None if time_limit is None else time.monotonic() + time_limit
        self.node_limit = node_limit
        self.mip_gap = mip_gap
        self.step = _objective_step(self.arr)
        self.best_x: np.ndarray | None = None
        self.best_obj = math.inf
        self.nodes = 0
        self.lp_calls = 0
        prio = np.zeros(len(self.arr.names))
        if priority:
            for i, n in enumerate(self.arr.names):
                prio[i] = priority(n)
        self.priority = prio

    # -- LP ----------------------------------------------------------------
    def lp(self, lb, ub):
        self.lp_calls += 1
        arr = self.arr
        res = linprog(
            arr.c, A_ub=arr.A_ub, b_ub=arr.b_ub, A_eq=arr.A_eq, b_eq=arr.b_eq,
            bounds=np.column_stack([lb, ub]), method="highs",
        )
        if res.status == 0:
            return res.fun, res.x
        if res.status == 2:
            return None
        if res.status == 3:
            raise ModelError("LP relaxation is unbounded")
        raise SolverError(f"LP relaxation failed: {res.message}")

    def rounded_bound(self, val: float) -> float:
        if self.step:
            return math.ceil(val / self.step - 1e-7) * self.step
        return val

    def cutoff(self) -> float:
        if self.best_obj == math.inf:
            return math.inf
        return self.best_obj - max(1e-9, self.mip_gap * abs(self.best_obj))

    def out_of_budget(self) -> bool:
        if self.deadline is not None and time.monotonic() > self.deadline:
            return True
        return self.node_limit is not None and self.nodes >= self.node_limit

    # -- incumbents ----------------------------------------------------------
    def offer(self, x: np.ndarray) -> bool:
        x = x.copy()
        ints = self.arr.integral
        x[ints] = np.round(x[ints])
        values = dict(zip(self.arr.names, x.tolist()))
        if self.model.max_violation(values) > FEAS_TOL:
            return False
        obj = float(self.arr.c @ x)
        if obj < self.best_obj - 1e-12:
            self.best_obj = obj
            self.best_x = x
            return True
        return False

    def try_rounding(self, x, lb, ub):
        ints = self.arr.integral
        r = np.clip(np.round(x[ints]), lb[ints], ub[ints])
        if ints.all():
            full = x.copy()
            full[ints] = r
            self.offer(full)
            return
        lb2, ub2 = lb.copy(), ub.copy()
        lb2[ints] = r
        ub2[ints] = r
        out = self.lp(lb2, ub2)
        if out is not None:
            self.offer(out[1])

    # -- branching -----------------------------------------------------------
    def pick(self, x) -> int | None:
        ints = self.arr.integral
        frac = np.abs(x - np.round(x))
        frac[~ints] = 0.0
        cand = np.flatnonzero(frac > INT_TOL)
        if len(cand) == 0:
            return None
        # highest priority first, then most fractional
        score = self.priority[cand] * 10.0 + np.minimum(frac[cand], 1.0)
        return int(cand[np.argmax(score)])

    def run(self) -> Solution:
        arr = self.arr
        counter = itertools.count()
        root = self.lp(arr.lb.copy(), arr.ub.copy())
        if root is None:
            return self.finish("infeasible", -math.inf, "root relaxation infeasible")
        root_bound = self.rounded_bound(root[0])
        heap = [(root_bound, next(counter), arr.lb.copy(), arr.ub.copy(), root)]
        self.try_rounding(root[1], arr.lb, arr.ub)
        global_bound = root_bound
        exhausted = True
        while heap:
            bound, _, lb, ub, solved = heapq.heappop(heap)
            global_bound = bound
            if bound >= self.cutoff():
                heap.clear()
                break
            # plunge
            while True:
                if self.out_of_budget():
                    exhausted = False
                    heapq.heappush(heap, (bound, next(counter), lb, ub, solved))
                    break
                if solved is None:
                    solved = self.lp(lb, ub)
                    self.nodes += 1
                    if solved is None:
                        break
                obj, x = solved
                nb = self.rounded_bound(obj)
                if nb >= self.cutoff():
                    break
                j = self.pick(x)
                if j is None:
                    self.offer(x)
                    break
                if self.nodes % 50 == 0:
                    self.try_rounding(x, lb, ub)
                v = x[j]
                down_ub = ub.copy()
                down_ub[j] = math.floor(v)
                up_lb = lb.copy()
                up_lb[j] = math.ceil(v)
                go_up = (v - math.floor(v)) >= 0.5
                if go_up:
                    heapq.heappush(heap, (nb, next(counter), lb, down_ub, None))
                    lb = up_lb
                else:
                    heapq.heappush(heap, (nb, next(counter), up_lb, ub, None))
                    ub = down_ub
                bound, solved = nb, None
            if not exhausted:
                break
        if exhausted:
            heap_bound = self.best_obj if self.best_x is not None else math.inf
            return self.finish("optimal" if self.best_x is not None else "infeasible",
                               heap_bound, "search complete")
        lower = min([h[0] for h in heap], default=global_bound)
        status = "feasible" if self.best_x is not None else "timeout"
        return self.finish(status, lower, "limit reached")

    def finish(self, status: str, bound: float, message: str) -> Solution:
        arr = self.arr
        sol = Solution(status, nodes=self.nodes, message=message)
        if bound not in (math.inf, -math.inf):
            sol.bound = arr.sign * bound + arr.c0
        if self.best_x is not None and status in ("optimal", "feasible"):
            x = self.best_x
            values = {}
            for name, val, integral in zip(arr.names, x.tolist(), arr.integral):
                values[name] = float(int(round(val))) if integral else float(val)
            sol.values = values
            sol.objective = self.model.objective_value(values)
        log.debug("bnb %s: status=%s nodes=%d lp=%d obj=%s bound=%s", self.model.name,
                  status, self.nodes, self.lp_calls, sol.objective, sol.bound)
        return sol


def branch_and_bound(model: Model, time_limit: float | None = None,
                     node_limit: int | None = None, initial: dict | None = None,
                     mip_gap: float = 1e-9, priority=None) -> Solution:
    """Solve ``model`` exactly (up to ``mip_gap``) or until a limit is hit.

    ``initial`` is an optional full assignment used as the first incumbent
    when it is feasible.  ``priority`` maps a variable name to a branching
    priority; higher is branched first.
    """
    search = _Search(model, time_limit, node_limit, mip_gap, priority)
    if not model.variables:
        return Solution("optimal", {}, model.objective_constant)
    if initial is not None:
        x = np.array([initial.get(n, np.nan) for n in search.arr.names], dtype=float)
        if not np.isnan(x).any():
            if not search.offer(x):
                log.debug("initial assignment rejected (infeasible)")
    return search.run()
