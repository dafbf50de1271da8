import json
import warnings

import pytest

from mulgen import ilp
from mulgen.ct_assign import (AssignmentError, StageAssignment, assign_stages,
                              assignment_hint, build_stage_model, extract_assignment,
                              greedy_assignment, validate_assignment)
from mulgen.ct_plan import min_stage_bound, plan_compressors
from mulgen.ppg import generate_and_array, inject_accumulator


def run_forward(a):
    """Independent replay: execute each stage's compressors on column counts."""
    cur = list(a.heights)
    for i in range(a.stage_count):
        nxt = list(cur)
        for j in range(len(cur)):
            f, h = a.f[i][j], a.h[i][j]
            assert 3 * f + 2 * h <= cur[j], (i, j)
            nxt[j] -= 2 * f + h
            if j + 1 < len(cur):
                nxt[j + 1] += f + h
            else:
                assert f + h == 0
        cur = nxt
    return cur


def mult_plans(n, acc=0):
    ppm = generate_and_array(n)
    if acc:
        ppm = inject_accumulator(ppm, acc)
    return plan_compressors(ppm), ppm


def test_single_column_three_bits():
    a = assign_stages(plan_compressors([3]))
    assert a.stage_count == 1
    assert a.h[0][0] == 1 and a.f[0][0] == 0


@pytest.mark.parametrize("n,s", [(4, 2), (8, 4), (16, 6)])
def test_stage_count_equals_bound(n, s):
    plans, ppm = mult_plans(n)
    a = assign_stages(plans)
    assert a.stage_count == min_stage_bound(max(ppm.heights)) == s
    assert a.optimal


def test_conservation_width4():
    plans, _ = mult_plans(4)
    a = assign_stages(plans)
    assert sum(map(sum, a.f)) == sum(p.f for p in plans)
    assert sum(map(sum, a.h)) == sum(p.h for p in plans)


@pytest.mark.parametrize("n,acc", [(4, 0), (6, 0), (8, 0), (4, 8), (8, 16)])
def test_forward_replay_reaches_two_rows(n, acc):
    plans, _ = mult_plans(n, acc)
    a = assign_stages(plans)
    final = run_forward(a)
    assert max(final) <= 2
    assert final == a.final_heights()
    last = a.stage_count - 1
    assert any(a.f[last][j] + a.h[last][j] for j in range(a.n_columns))


def test_timeout_incumbent_still_valid():
    plans, _ = mult_plans(6)
    model = build_stage_model(plans)
    hint = assignment_hint(model, greedy_assignment(plans))
    sol = ilp.solve(model, backend="bnb", node_limit=1, initial=hint)
    assert sol.has_values
    a = extract_assignment(sol, model)
    validate_assignment(a)
    assert max(run_forward(a)) <= 2


def test_stage_max_below_bound_warns_then_fails():
    plans, _ = mult_plans(8)
    with pytest.warns(UserWarning, match="below the stage bound"):
        with pytest.raises(AssignmentError, match="infeasible"):
            assign_stages(plans, stage_max=2)


def test_stage_model_shape():
    plans, _ = mult_plans(4)
    m = build_stage_model(plans)
    assert m.meta["stage_max"] == min_stage_bound(4) + 2
    assert "S" in m.variables
    assert m.variables["S"].is_integral
    assert any(n.startswith("y_") and v.kind == "binary" for n, v in m.variables.items())


def test_greedy_flagged_not_optimal():
    plans, _ = mult_plans(8)
    g = assign_stages(plans, "greedy")
    assert g.method == "greedy" and not g.optimal
    assert g.notes
    validate_assignment(g)
    assert max(run_forward(g)) <= 2


def test_tie_break_is_deterministic_and_early():
    plans, _ = mult_plans(8)
    a = assign_stages(plans)
    b = assign_stages(plans)
    assert a.to_dict() == b.to_dict()

    def lateness(x):
        return sum((i + 1) * (x.f[i][j] + x.h[i][j]) for i, j, *_ in x.slices())

    no_tb = assign_stages(plans, tie_break=False)
    assert no_tb.stage_count == a.stage_count
    assert lateness(a) <= lateness(no_tb)


def test_bnb_backend_agrees_on_small_tree():
    plans, _ = mult_plans(4)
    assert assign_stages(plans, backend="bnb").stage_count == assign_stages(plans).stage_count


def test_json_round_trip():
    plans, _ = mult_plans(6)
    a = assign_stages(plans)
    back = StageAssignment.from_dict(json.loads(json.dumps(a.to_dict())), plans)
    assert back.to_dict() == a.to_dict()


def test_validate_rejects_tampered_grid():
    plans, _ = mult_plans(4)
    d = assign_stages(plans).to_dict()
    d["f"][0] = [x + 1 for x in d["f"][0]]
    with pytest.raises(AssignmentError):
        StageAssignment.from_dict(d, plans)


def test_no_compressors_needed():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = assign_stages(plan_compressors([1, 2, 2]))
    assert a.stage_count == 0
    assert a.final_heights() == [1, 2, 2]
