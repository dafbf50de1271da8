import pytest

from mulgen.cpa import bit_delays
from mulgen.ct_assign import AssignmentError
from mulgen.flow import (FlowConfig, adder_corpus, fit_timing, generate_adder,
                         generate_multiplier, pareto_front, sweep_point)
from mulgen.netlist import report
from mulgen.verify import check_equivalence


@pytest.mark.parametrize("strategy", ["area", "timing", "tradeoff"])
@pytest.mark.parametrize("n,acc", [(4, 0), (6, 0), (4, 8)])
def test_every_strategy_is_exact(strategy, n, acc):
    r = generate_multiplier(n, acc, FlowConfig(strategy=strategy))
    assert check_equivalence(r.design.netlist, "exhaustive").passed


def test_strategies_order_delay_and_area():
    res = {s: generate_multiplier(16, 0, FlowConfig(strategy=s))
           for s in ("area", "timing", "tradeoff")}
    assert res["timing"].report.delay <= res["area"].report.delay
    assert res["area"].design.graph.size <= res["timing"].design.graph.size
    for r in res.values():
        assert check_equivalence(r.design.netlist, "random", n=5000).passed


def test_target_delay_budget():
    loose = generate_multiplier(8, 0, FlowConfig(target_delay=1000.0))
    assert loose.cpa is not None and not loose.cpa.steps
    assert not loose.notes


def test_stage_max_infeasible():
    with pytest.warns(UserWarning), pytest.raises(AssignmentError):
        generate_multiplier(8, 0, FlowConfig(stage_max=2))


def test_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(strategy="fastest")
    with pytest.raises(ValueError):
        FlowConfig(wiring="random")
    with pytest.raises(ValueError):
        FlowConfig(time_limit=0)


def test_greedy_paths_for_wide_inputs():
    r = generate_multiplier(20, 0, FlowConfig(strategy="area"))
    assert r.design.assignment.method == "greedy"
    assert check_equivalence(r.design.netlist, "random", n=3000).passed


def test_ct_delay_matches_netlist_profile():
    r = generate_multiplier(8, 0, FlowConfig(strategy="area", wiring="greedy"))
    assert r.ct_delay > 0
    assert r.report.delay > r.ct_delay


def test_summary_fields():
    s = generate_multiplier(4).summary()
    assert {"area", "delay", "cpa", "ct", "notes"} <= set(s)


def test_adder_with_arrivals():
    prof = [0, 1, 2, 3, 3, 3, 2, 1]
    r = generate_adder(8, FlowConfig(strategy="timing"), prof)
    assert check_equivalence(r.design.netlist, "exhaustive").passed
    assert report(r.design.netlist).area > 0


def test_pareto_front():
    pts = [(1, 5), (2, 3), (3, 3), (4, 1), (5, 5)]
    assert pareto_front(pts) == [True, True, False, True, False]


def test_sweep_point():
    row = sweep_point(("add", 8, 0, "area", FlowConfig()))
    assert row["strategy"] == "area" and row["width"] == 8 and row["area"] > 0


def test_corpus_is_varied_and_seeded():
    a = adder_corpus(12, seed=1)
    b = adder_corpus(12, seed=1)
    assert [g.to_dict() for g in a] == [g.to_dict() for g in b]
    assert len({(g.width, g.size) for g in a}) > 4
    assert all(max(bit_delays(g)) > 0 for g in a)


def test_fit_timing_small():
    r = fit_timing(count=12, seed=0)
    assert r.adders == 12 and r.samples > 50
    assert 0 < r.fdc.r2 <= 1
