import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mulgen.cpa import (FdcFeatures, FdcModel, GraphError, PrefixGraph, Regions,
                        TransformError, bit_delays, build_initial_cpa, depth_bound,
                        extract_subtree, fdc_delay, fdc_path, fit_depth_only,
                        fit_fdc, from_bits, graph_opt, optimize_cpa, rca, segment_regions,
                        sklansky, to_bits)
from mulgen.cpa import _lowering_plan


def exhaustive_sums(g):
    n = g.width
    a, b = np.meshgrid(np.arange(1 << n), np.arange(1 << n), indexing="ij")
    a, b = a.ravel(), b.ravel()
    got = from_bits(g.sum_bits(to_bits(a, n), to_bits(b, n)))
    return got, (a + b).tolist()


def assert_adds(g, samples=None, seed=0):
    """Exhaustive for small widths, random Python-int oracle otherwise."""
    n = g.width
    if n <= 8 and samples is None:
        got, want = exhaustive_sums(g)
        assert got == want
        return
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 1 << min(n, 63), samples or 2000, dtype=np.uint64)
    b = rng.integers(0, 1 << min(n, 63), samples or 2000, dtype=np.uint64)
    got = from_bits(g.sum_bits(to_bits(a, n), to_bits(b, n)))
    assert got == [int(x) + int(y) for x, y in zip(a, b)]


# -- regions -------------------------------------------------------------------

def test_flat_profile_is_one_region():
    r = segment_regions([3.0] * 8)
    assert (r.region1, r.region2, r.region3) == (range(0), range(0, 8), range(8, 8))


def test_trapezoid_regions():
    r = segment_regions([0, 1, 2, 2, 2, 1, 0], eps=0.5)
    assert list(r.region1) == [0, 1]
    assert list(r.region2) == [2, 3, 4]
    assert list(r.region3) == [5, 6]
    assert r.width == 7


def test_empty_profile():
    assert segment_regions([]).width == 0


@given(st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=40),
       st.floats(0, 5))
def test_regions_partition_bits(profile, eps):
    r = segment_regions(profile, eps)
    assert list(r.region1) + list(r.region2) + list(r.region3) == list(range(len(profile)))
    assert len(r.region2) >= 1
    top = max(profile)
    assert all(profile[i] >= top - eps for i in r.region2)


# -- structures ----------------------------------------------------------------

def test_rca_depth_profile():
    # inputs sit at level 0, so bit i of a ripple chain is i levels deep
    assert rca(4).depth_profile() == [0, 1, 2, 3]
    assert rca(4).size == 3


def test_sklansky_width8():
    g = sklansky(8)
    assert g.depth() == 3
    assert g.size == 12
    fo = g.fanouts()
    # the [3:0] node drives all four upper-half outputs
    n30 = g.outputs[3]
    assert len(fo[n30]) == 4 == g.max_fanout()


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_structures_add(n):
    for g in (rca(n), sklansky(n)):
        g.validate()
        assert_adds(g)


def test_sklansky_depth_matches_bound():
    for n in range(1, 40):
        assert sklansky(n).depth() == depth_bound(n)


def test_initial_cpa_shape_and_function():
    prof = [0, 1, 2, 3, 4, 4, 4, 4, 3, 2, 1, 0]
    r = segment_regions(prof, eps=0.5)
    g = build_initial_cpa(r, arrivals=prof)
    g.validate()
    assert g.depth_profile()[:4] == [0, 1, 2, 3]
    assert_adds(g, samples=3000)
    fixed = build_initial_cpa(r, arrivals=prof, block_size=2)
    assert_adds(fixed, samples=3000)


def test_initial_cpa_width_mismatch():
    with pytest.raises(GraphError):
        build_initial_cpa(Regions(range(0, 2), range(2, 4), range(4, 4)), width=5)


def test_graph_errors():
    with pytest.raises(GraphError):
        PrefixGraph(0)
    g = PrefixGraph(4)
    with pytest.raises(GraphError, match="adjacent"):
        g.add(3, 1)
    n = g.add(1, 0)
    with pytest.raises(GraphError):
        g.set_output(2, n)


def test_json_round_trip():
    g = sklansky(6, arrivals=[0, 1, 2, 3, 4, 5])
    back = PrefixGraph.from_dict(json.loads(g.to_json()))
    assert back.to_dict() == g.to_dict()
    assert "digraph" in g.to_dot()


# -- sub-trees and the timing model --------------------------------------------

def test_subtree_bit0_is_input():
    st0 = extract_subtree(rca(4), 0)
    assert st0.nodes == {0} and st0.prefix_nodes() == []
    assert st0.span == 1


def test_rca_subtree_bit3():
    g = rca(4)
    s = extract_subtree(g, 3)
    assert len(s.prefix_nodes()) == 3
    assert {0, 1, 2, 3} <= s.nodes
    with pytest.raises(GraphError):
        extract_subtree(g, 4)


def test_fdc_delay_examples():
    unit = FdcModel(1, 1, 1, 1, 0)
    assert fdc_delay(FdcFeatures(), unit) == 0
    assert fdc_delay(FdcFeatures(2, 1, 3, 1), unit) == 7
    assert fdc_delay([0, 0, 0, 0], FdcModel(b=2.5)) == 2.5


def test_rca_features_hand_count():
    # bit 3 of a 4-bit chain: two black nodes each feeding one black node,
    # then the blue output node
    path, feats, _ = fdc_path(extract_subtree(rca(4), 3))
    assert feats == FdcFeatures(f_black=1, f_blue=1, n_black=2, n_blue=1)
    assert len(path) == 4


def test_rca_delay_strictly_increasing():
    d = bit_delays(rca(12), use_arrivals=False)
    assert all(x < y for x, y in zip(d, d[1:]))


def test_arrivals_shift_delays():
    flat = bit_delays(rca(4), use_arrivals=True)
    late = bit_delays(rca(4, arrivals=[5, 5, 5, 5]), use_arrivals=True)
    assert [b - a for a, b in zip(flat, late)] == pytest.approx([5] * 4)


def test_fit_recovers_exact_model():
    truth = FdcModel(0.7, 0.3, 1.2, 0.4, 0.9)
    rng = np.random.default_rng(0)
    samples = []
    for _ in range(30):
        f = FdcFeatures(*rng.integers(0, 8, 4).tolist())
        samples.append((f, fdc_delay(f, truth)))
    m = fit_fdc(samples)
    assert np.allclose(m.coefficients, truth.coefficients, atol=1e-9)
    assert m.r2 == pytest.approx(1.0)


def test_fit_needs_five_samples():
    with pytest.raises(ValueError, match="at least 5"):
        fit_fdc([((1, 0, 1, 0), 1.0)] * 4)


def test_fit_rank_deficient():
    with pytest.raises(ValueError, match="rank"):
        fit_fdc([((1, 0, 1, 0), float(k)) for k in range(6)])


def test_depth_only_fit():
    k, b, r2, mape = fit_depth_only([(d, 2 * d + 1) for d in range(6)])
    assert (k, b) == pytest.approx((2, 1))
    assert r2 == pytest.approx(1) and mape == pytest.approx(0, abs=1e-9)


# -- GraphOpt --------------------------------------------------------------------

def test_graph_opt_on_chain():
    g = rca(4)
    before = g.size
    root = g.outputs[3]
    tf0 = g.nodes[root].tf
    q = g.nodes[g.nodes[root].ntf]
    s = graph_opt(g, root)
    # tf(s) = old tf(p), ntf(s) = tf(old ntf(p)), ntf(p) = ntf(old ntf(p))
    assert g.nodes[s].tf == tf0 and g.nodes[s].ntf == q.tf
    assert g.nodes[root].tf == s and g.nodes[root].ntf == q.ntf
    g.validate()
    assert g.depth(3) == 2
    assert g.size == before + 1
    assert_adds(g)


def test_graph_opt_preconditions():
    g = rca(3)
    with pytest.raises(TransformError):
        graph_opt(g, 0)
    with pytest.raises(TransformError):
        graph_opt(g, g.outputs[1])


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_random_graph_opt_sequences_stay_adders(data):
    n = data.draw(st.integers(2, 8))
    g = rca(n) if data.draw(st.booleans()) else sklansky(n)
    for _ in range(data.draw(st.integers(0, 6))):
        cands = [p for p in g.prefix_nodes() if not g.is_input(g.nodes[p].ntf)]
        if not cands:
            break
        graph_opt(g, data.draw(st.sampled_from(cands)))
        g.prune()
        g.validate()
    assert_adds(g)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 24), st.integers(0, 2))
def test_lowering_plan_step_by_step(n, extra):
    """Lowering one level at a time walks a ripple chain to the depth guard."""
    g = rca(n)
    bit = n - 1
    goal = depth_bound(n) + 1 + extra
    assert _lowering_plan(g, g.outputs[bit], g.depth(bit)) == []
    while g.depth(bit) > goal:
        before = g.depth(bit)
        plan = _lowering_plan(g, g.outputs[bit], before - 1)
        assert plan
        for p in plan:
            graph_opt(g, p)
        g.prune()
        g.validate()
        assert g.depth(bit) <= before - 1
    assert_adds(g, samples=None if n <= 8 else 500)


def test_lowering_plan_none_below_bound():
    g = rca(8)
    assert _lowering_plan(g, g.outputs[7], depth_bound(8) - 1) is None


# -- optimisation ----------------------------------------------------------------

def test_met_constraints_are_a_fixed_point():
    g = sklansky(8)
    res = optimize_cpa(g, [100.0] * 8)
    assert res.steps == [] and res.unmet == []
    assert res.graph.to_dict() == g.to_dict()


def test_tight_rca8_reaches_log_depth():
    seen = []
    res = optimize_cpa(rca(8), [0.0] * 8, on_step=lambda x: seen.append(x.copy()))
    assert res.graph.depth() <= depth_bound(8) + 1
    assert res.steps
    for g in seen:
        g.validate()
        assert_adds(g)
    assert_adds(res.graph)


def test_loose_budget_smaller_than_sklansky():
    n = 16
    budgets = bit_delays(sklansky(n), use_arrivals=False)
    slack = [b + 2.0 for b in budgets]
    res = optimize_cpa(rca(n), slack)
    assert not res.unmet
    assert res.graph.size < sklansky(n).size
    assert_adds(res.graph)


def test_input_graph_not_modified():
    g = rca(6)
    snap = g.to_dict()
    optimize_cpa(g, [0.0] * 6)
    assert g.to_dict() == snap


def test_optimize_argument_checks():
    with pytest.raises(GraphError):
        optimize_cpa(rca(4), [0.0] * 3)
    with pytest.raises(ValueError, match="sibling"):
        optimize_cpa(rca(4), [0.0] * 4, sibling_rule="nearest")


@pytest.mark.parametrize("rule", ["critical", "cone"])
def test_sibling_rules_both_produce_adders(rule):
    res = optimize_cpa(rca(10), [6.0] * 10, sibling_rule=rule)
    res.graph.validate()
    assert_adds(res.graph, samples=3000)


def test_max_steps_respected():
    res = optimize_cpa(rca(16), [0.0] * 16, max_steps=3)
    assert len(res.steps) <= 3


def test_depth_bound_values():
    assert [depth_bound(s) for s in (1, 2, 3, 4, 5, 8, 9)] == [0, 1, 2, 2, 3, 3, 4]
    assert depth_bound(64) == math.log2(64)
