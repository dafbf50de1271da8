"""Assign planned compressors to stages with the fewest stages.

A *slice* ``(i, j)`` is stage ``i`` of column ``j``.  ``pp[i][j]`` bits
enter the slice; ``f[i][j]`` 3:2 and ``h[i][j]`` 2:2 compressors consume
``3f + 2h`` of them.  Bits move to the next stage as

    pp[i+1][j] = pp[i][j] - 2 f[i][j] - h[i][j] + f[i][j-1] + h[i][j-1]

(sums stay in the column, carries enter column ``j+1`` one stage later).
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

from . import ilp
from .ct_plan import ColumnPlan, min_stage_bound

log = logging.getLogger(__name__)


class AssignmentError(RuntimeError):
    """A decoded assignment violates the stage model (solver or decode bug)."""


@dataclass
class StageAssignment:
    stage_count: int
    f: list[list[int]]  # [stage][column]
    h: list[list[int]]
    pp: list[list[int]]  # [stage][column], stage_count + 1 rows
    plans: list[ColumnPlan]
    stage_max: int
    method: str = "ilp"
    optimal: bool = True
    notes: list[str] = field(default_factory=list)

    @property
    def n_columns(self) -> int:
        return len(self.plans)

    @property
    def heights(self) -> list[int]:
        return [p.pp for p in self.plans]

    def slices(self):
        """Yield ``(i, j, f, h, pp)`` for every slice of the tree."""
        for i in range(self.stage_count):
            for j in range(self.n_columns):
                yield i, j, self.f[i][j], self.h[i][j], self.pp[i][j]

    def final_heights(self) -> list[int]:
        return list(self.pp[self.stage_count])

    def to_dict(self) -> dict:
        return {
            "stage_count": self.stage_count,
            "stage_max": self.stage_max,
            "method": self.method,
            "optimal": self.optimal,
            "f": self.f,
            "h": self.h,
            "pp": self.pp,
            "heights": self.heights,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict, plans: list[ColumnPlan]) -> "StageAssignment":
        a = cls(d["stage_count"], d["f"], d["h"], d["pp"], plans, d["stage_max"],
                d.get("method", "ilp"), d.get("optimal", True), list(d.get("notes", [])))
        validate_assignment(a)
        return a


def _fname(i, j):
    return f"f_{i}_{j}"


def _hname(i, j):
    return f"h_{i}_{j}"


def _ppname(i, j):
    return f"pp_{i}_{j}"


def _yname(i, j):
    return f"y_{i}_{j}"


def build_stage_model(plans: Sequence[ColumnPlan], stage_max: int | None = None,
                      tie_break: bool = True) -> ilp.Model:
    """Stage-assignment model; minimizes the number of used stages ``S``.

    Slice variables exist only for columns that hold compressors.  With
    ``tie_break`` the objective adds ``eps * sum (i+1)(f+h)`` with ``eps``
    small enough that it never trades against one whole stage.
    """
    plans = list(plans)
    heights = [p.pp for p in plans]
    bound = min_stage_bound(max(max(heights), 1))
    if stage_max is None:
        stage_max = bound + 2
    if stage_max < bound:
        warnings.warn(f"stage_max={stage_max} is below the stage bound {bound}; "
                      "the model is infeasible", stacklevel=2)
    J = len(plans)
    m = ilp.Model(f"stage_assign_{J}c_{stage_max}s")
    m.meta.update(kind="stage", stage_max=stage_max, plans=plans, bound=bound)
    S = m.add_var("S", "integer", 0, stage_max)
    active = [p.f + p.h > 0 for p in plans]

    for i in range(stage_max + 1):
        for j in range(J):
            m.add_var(_ppname(i, j), "integer", 0, None)
    for j in range(J):
        m.add_constraint({_ppname(0, j): 1}, "=", heights[j], name=f"init_{j}")
    for i in range(stage_max):
        for j in range(J):
            if not active[j]:
                continue
            p = plans[j]
            if p.f:
                m.add_var(_fname(i, j), "integer", 0, p.f)
            if p.h:
                m.add_var(_hname(i, j), "integer", 0, p.h)
            m.add_var(_yname(i, j), "binary")

    def fh(i, j):
        out = {}
        if 0 <= j < J and active[j]:
            if plans[j].f:
                out[_fname(i, j)] = 1
            if plans[j].h:
                out[_hname(i, j)] = 1
        return out

    for j in range(J):
        if not active[j]:
            continue
        p = plans[j]
        if p.f:
            m.add_constraint({_fname(i, j): 1 for i in range(stage_max)}, "=", p.f,
                             name=f"sumf_{j}")
        if p.h:
            m.add_constraint({_hname(i, j): 1 for i in range(stage_max)}, "=", p.h,
                             name=f"sumh_{j}")
    for i in range(stage_max):
        for j in range(J):
            # pp[i+1][j] = pp[i][j] - 2f[i][j] - h[i][j] + f[i][j-1] + h[i][j-1]
            row = {_ppname(i + 1, j): 1, _ppname(i, j): -1}
            if active[j]:
                if plans[j].f:
                    row[_fname(i, j)] = 2
                if plans[j].h:
                    row[_hname(i, j)] = 1
            for v in fh(i, j - 1):
                row[v] = row.get(v, 0) - 1
            m.add_constraint(row, "=", 0, name=f"flow_{i}_{j}")
            if not active[j]:
                continue
            cap = {_ppname(i, j): -1}
            if plans[j].f:
                cap[_fname(i, j)] = 3
            if plans[j].h:
                cap[_hname(i, j)] = 2
            m.add_constraint(cap, "<=", 0, name=f"cap_{i}_{j}")
            # tightest big-M: all of the column's compressors in one slice
            big_m = plans[j].f + plans[j].h
            link = {v: 1 for v in fh(i, j)}
            link[_yname(i, j)] = -big_m
            m.add_constraint(link, "<=", 0, name=f"use_{i}_{j}")
            m.add_constraint({S: 1, _yname(i, j): -(i + 1)}, ">=", 0, name=f"stage_{i}_{j}")

    obj = {S: 1.0}
    if tie_break:
        total = sum(p.f + p.h for p in plans)
        eps = 1.0 / (1 + total * stage_max)
        for i in range(stage_max):
            for j in range(J):
                for v in fh(i, j):
                    obj[v] = eps * (i + 1)
    m.set_objective(obj, "min")
    return m


def _stage_priority(name: str) -> int:
    return {"S": 3, "y": 2, "f": 1, "h": 1}.get(name.split("_", 1)[0], 0)


def extract_assignment(solution: ilp.Solution, model: ilp.Model) -> StageAssignment:
    if not solution.has_values:
        raise AssignmentError(f"no assignment in a solution with status {solution.status}")
    plans = model.meta["plans"]
    stage_max = model.meta["stage_max"]
    J = len(plans)
    vals = solution.values

    def get(name):
        return int(round(vals.get(name, 0.0)))

    f = [[get(_fname(i, j)) for j in range(J)] for i in range(stage_max)]
    h = [[get(_hname(i, j)) for j in range(J)] for i in range(stage_max)]
    used = [i for i in range(stage_max) if any(f[i][j] or h[i][j] for j in range(J))]
    S = (max(used) + 1) if used else 0
    if S != get("S") and solution.status == "optimal":
        raise AssignmentError(f"decoded stage count {S} disagrees with S={get('S')}")
    a = _from_counts(plans, f[:S], h[:S], stage_max)
    a.method = "ilp"
    a.optimal = solution.status == "optimal"
    validate_assignment(a)
    return a


def _from_counts(plans, f, h, stage_max) -> StageAssignment:
    J = len(plans)
    S = len(f)
    pp = [[p.pp for p in plans]]
    for i in range(S):
        nxt = []
        for j in range(J):
            v = pp[i][j] - 2 * f[i][j] - h[i][j]
            if j > 0:
                v += f[i][j - 1] + h[i][j - 1]
            nxt.append(v)
        pp.append(nxt)
    return StageAssignment(S, [list(r) for r in f], [list(r) for r in h], pp,
                           list(plans), stage_max)


def validate_assignment(a: StageAssignment) -> None:
    """Re-derive every invariant from the integer grids."""
    J = a.n_columns
    for j, p in enumerate(a.plans):
        if sum(a.f[i][j] for i in range(a.stage_count)) != p.f:
            raise AssignmentError(f"column {j}: 3:2 count differs from plan")
        if sum(a.h[i][j] for i in range(a.stage_count)) != p.h:
            raise AssignmentError(f"column {j}: 2:2 count differs from plan")
    if a.pp[0] != a.heights:
        raise AssignmentError("stage-0 heights differ from the matrix")
    for i in range(a.stage_count):
        for j in range(J):
            f, h = a.f[i][j], a.h[i][j]
            if f < 0 or h < 0:
                raise AssignmentError(f"slice ({i},{j}) has negative counts")
            if 3 * f + 2 * h > a.pp[i][j]:
                raise AssignmentError(f"slice ({i},{j}) lacks inputs for its compressors")
            expect = a.pp[i][j] - 2 * f - h + (a.f[i][j - 1] + a.h[i][j - 1] if j else 0)
            if a.pp[i + 1][j] != expect:
                raise AssignmentError(f"slice ({i},{j}) violates bit conservation")
    if any(v > 2 for v in a.pp[a.stage_count]):
        raise AssignmentError("more than two bits remain in some column")
    # the top column's carries must have somewhere to go
    if a.stage_count and any(a.f[i][J - 1] + a.h[i][J - 1] for i in range(a.stage_count)):
        raise AssignmentError("compressors in the top column would carry out of the tree")


def _dadda_targets(stages: int) -> list[int]:
    d = [2]
    while len(d) < stages + 1:
        d.append(d[-1] * 3 // 2)
    return d


def _dadda_schedule(plans: list[ColumnPlan], stages: int) -> StageAssignment | None:
    """Place compressors as late as the Dadda height targets allow."""
    J = len(plans)
    rem_f = [p.f for p in plans]
    rem_h = [p.h for p in plans]
    cur = [p.pp for p in plans]
    targets = _dadda_targets(stages)
    f_rows, h_rows = [], []
    for i in range(stages):
        target = targets[stages - 1 - i]
        fr, hr, nxt = [0] * J, [0] * J, [0] * J
        for j in range(J):
            cin = fr[j - 1] + hr[j - 1] if j else 0
            excess = cur[j] + cin - target
            f = h = 0
            while excess > 0:
                free = cur[j] - 3 * f - 2 * h
                if excess == 1 and h < rem_h[j] and free >= 2:
                    h += 1
                    excess -= 1
                elif f < rem_f[j] and free >= 3:
                    f += 1
                    excess -= 2
                elif h < rem_h[j] and free >= 2:
                    h += 1
                    excess -= 1
                else:
                    break
            if i == stages - 1:
                f, h = rem_f[j], rem_h[j]
            fr[j], hr[j] = f, h
            rem_f[j] -= f
            rem_h[j] -= h
            nxt[j] = cur[j] - 2 * f - h + cin
        f_rows.append(fr)
        h_rows.append(hr)
        cur = nxt
    a = _from_counts(plans, f_rows, h_rows, stages)
    try:
        validate_assignment(a)
    except AssignmentError:
        return None
    return a


def _asap_schedule(plans: list[ColumnPlan], stage_limit: int) -> StageAssignment:
    J = len(plans)
    rem_f = [p.f for p in plans]
    rem_h = [p.h for p in plans]
    cur = [p.pp for p in plans]
    f_rows, h_rows = [], []
    while any(rem_f) or any(rem_h):
        if len(f_rows) >= stage_limit:
            raise AssignmentError("greedy assignment did not terminate")
        fr, hr = [0] * J, [0] * J
        for j in range(J):
            fr[j] = min(rem_f[j], cur[j] // 3)
            hr[j] = min(rem_h[j], (cur[j] - 3 * fr[j]) // 2)
            # hold the 2:2 back while 3:2s are pending in the column
            if hr[j] and rem_f[j] > fr[j]:
                hr[j] = 0
        nxt = []
        for j in range(J):
            nxt.append(cur[j] - 2 * fr[j] - hr[j] + (fr[j - 1] + hr[j - 1] if j else 0))
            rem_f[j] -= fr[j]
            rem_h[j] -= hr[j]
        if not any(fr) and not any(hr):
            raise AssignmentError("greedy assignment stalled")
        f_rows.append(fr)
        h_rows.append(hr)
        cur = nxt
    a = _from_counts(plans, f_rows, h_rows, max(len(f_rows), 1))
    validate_assignment(a)
    return a


def greedy_assignment(plans: Sequence[ColumnPlan], stage_limit: int = 64) -> StageAssignment:
    """Dadda-style schedule without a solver.

    Tries the fewest stages first, placing each column's compressors as
    late as the Dadda height targets allow; falls back to an
    earliest-stage schedule.  The result is not proven stage-minimal.
    """
    plans = list(plans)
    start = min_stage_bound(max(max(p.pp for p in plans), 1))
    a = None
    for stages in range(start, start + 3):
        a = _dadda_schedule(plans, stages)
        if a is not None:
            break
    asap = _asap_schedule(plans, stage_limit)
    if a is None or asap.stage_count < a.stage_count:
        a = asap
    a.method = "greedy"
    a.optimal = False
    a.notes.append("greedy schedule; stage count not proven minimal")
    return a


def assignment_hint(model: ilp.Model, a: StageAssignment) -> dict[str, float] | None:
    """Full variable assignment for ``model`` reproducing ``a`` (or None if
    ``a`` needs more stages than the model has)."""
    stage_max = model.meta["stage_max"]
    if a.stage_count > stage_max:
        return None
    plans = model.meta["plans"]
    J = len(plans)
    vals = {name: 0.0 for name in model.variables}
    vals["S"] = float(a.stage_count)
    for i in range(stage_max + 1):
        row = a.pp[min(i, a.stage_count)]
        for j in range(J):
            vals[_ppname(i, j)] = float(row[j])
    for i in range(a.stage_count):
        for j in range(J):
            if _fname(i, j) in vals:
                vals[_fname(i, j)] = float(a.f[i][j])
            if _hname(i, j) in vals:
                vals[_hname(i, j)] = float(a.h[i][j])
            if _yname(i, j) in vals:
                vals[_yname(i, j)] = float(a.f[i][j] + a.h[i][j] > 0)
    return vals


def _earliness_objective(model: ilp.Model) -> dict[str, float]:
    obj = {}
    for name in model.variables:
        kind, *rest = name.split("_")
        if kind in ("f", "h"):
            obj[name] = float(int(rest[0]) + 1)
    return obj


def assign_stages(plans: Sequence[ColumnPlan], method: str = "ilp", *,
                  stage_max: int | None = None, time_limit: float | None = 3600.0,
                  backend: str = "internal", solver_path: str | None = None,
                  tie_break: bool = True) -> StageAssignment:
    """Stage assignment by ILP (seeded with the greedy schedule) or greedily.

    The internal backend solves the tie-break lexicographically: first
    ``min S``, then ``min sum (i+1)(f+h)`` with ``S`` fixed.  External
    solvers get the single weighted model.
    """
    greedy = greedy_assignment(plans)
    if method == "greedy":
        return greedy
    if method != "ilp":
        raise ValueError(f"unknown assignment method {method!r}")
    deadline = None if time_limit is None else time.monotonic() + time_limit

    def remaining():
        return None if deadline is None else max(0.0, deadline - time.monotonic())

    lexicographic = tie_break and backend != "external"
    model = build_stage_model(plans, stage_max, tie_break=tie_break and not lexicographic)
    hint = assignment_hint(model, greedy)
    sol = ilp.solve(model, remaining(), backend, solver_path=solver_path, initial=hint,
                    priority=_stage_priority)
    if sol.status == "infeasible":
        raise AssignmentError("stage model is infeasible; raise stage_max")
    if sol.status == "timeout":
        raise AssignmentError("stage model timed out without an incumbent")
    a = extract_assignment(sol, model)
    if sol.status == "feasible":
        a.notes.append("solver limit reached; stage count not proven minimal")
    if lexicographic:
        s_star = a.stage_count
        model.variables["S"].ub = s_star
        model.set_objective(_earliness_objective(model), "min")
        hint2 = assignment_hint(model, a)
        sol2 = ilp.solve(model, remaining(), backend, solver_path=solver_path, initial=hint2, priority=_stage_priority)
        if sol2.has_values:
            b = extract_assignment(sol2, model)
            if b.stage_count == s_star:
                b.optimal = a.optimal
                b.notes = a.notes
                a = b
        if sol2.status != "optimal":
            a.notes.append("tie-break (earliest placement) not proven optimal")
    return a
