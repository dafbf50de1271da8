import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mulgen import ilp
from mulgen.cpa import rca, sklansky
from mulgen.ct_assign import assign_stages
from mulgen.ct_plan import plan_area, plan_compressors
from mulgen.ct_wire import greedy_wiring
from mulgen.netlist import Gate, GateNetlist, elaborate_multiplier
from mulgen.ppg import generate_and_array, inject_accumulator
from mulgen.verify import (VerifyError, brute_force_ct, check_equivalence, corner_inputs,
                           enumerate_model, evaluate_recursive, exhaustive_inputs, pack,
                           plan_counts, random_inputs, reference, simulate, unpack)


def build(n, acc=0, graph=sklansky):
    ppm = generate_and_array(n)
    if acc:
        ppm = inject_accumulator(ppm, acc)
    a = assign_stages(plan_compressors(ppm), "ilp" if n <= 16 else "greedy")
    return elaborate_multiplier(ppm, a, greedy_wiring(a, ppm=ppm),
                                lambda off, m: graph(m)).netlist


def to_bits(x, w):
    return np.array([[(v >> i) & 1 for i in range(w)] for v in x], bool)


def from_bits(b):
    return [sum(int(x) << i for i, x in enumerate(row)) for row in b]


def test_pack_round_trip():
    rng = np.random.default_rng(0)
    for n in (1, 63, 64, 65, 300):
        bits = rng.integers(0, 2, n).astype(bool)
        assert np.array_equal(unpack(pack(bits), n), bits)


def test_single_and():
    nl = GateNetlist("t")
    a = nl.add_input("a", 2)
    nl.add_gate("AND", a, "n")
    nl.set_output("y", ["n"])
    out = simulate(nl, {"a": np.array([[1, 1], [1, 0]], bool)})
    assert out["y"][:, 0].tolist() == [True, False]


def test_reference_small():
    got = reference("mult", {"a": to_bits([7], 4), "b": to_bits([9], 4)}, 8)
    assert from_bits(got) == [63]
    got = reference("mac", {"a": to_bits([255], 8), "b": to_bits([255], 8),
                            "c": to_bits([65535], 16)}, 17)
    assert from_bits(got) == [130560]
    assert from_bits(reference("add", {"a": to_bits([5], 3), "b": to_bits([6], 3)}, 4)) == [11]
    with pytest.raises(VerifyError):
        reference("div", {"a": to_bits([1], 1), "b": to_bits([1], 1)}, 1)


def test_reference_wide_against_python_ints():
    rng = np.random.default_rng(2)
    w = 64
    a = [int(x) for x in rng.integers(0, 1 << 62, 50)] + [(1 << 64) - 1]
    b = [int(x) for x in rng.integers(0, 1 << 62, 50)] + [(1 << 64) - 1]
    c = [int(x) for x in rng.integers(0, 1 << 62, 51)]
    got = reference("mac", {"a": to_bits(a, w), "b": to_bits(b, w), "c": to_bits(c, 2 * w)},
                    2 * w + 1)
    assert from_bits(got) == [x * y + z for x, y, z in zip(a, b, c)]


def test_width4_seven_times_nine():
    nl = build(4)
    assert evaluate_recursive(nl, {"a": 7, "b": 9})["y"] == 63
    y = simulate(nl, {"a": to_bits([7], 4), "b": to_bits([9], 4)})["y"]
    assert from_bits(y) == [63]


def test_mac8_corner():
    nl = build(8, 16)
    out = evaluate_recursive(nl, {"a": 255, "b": 255, "c": 65535})["y"]
    assert out == 130560


def test_exhaustive_width8():
    rep = check_equivalence(build(8, graph=rca), "exhaustive")
    assert rep.passed and rep.vectors == 1 << 16 and rep.mode == "exhaustive"


def test_auto_picks_mode():
    assert check_equivalence(build(4)).mode == "exhaustive"
    assert check_equivalence(build(12), n=100).mode == "random"


def test_mutation_yields_counterexample():
    nl = build(4)
    # swap one partial-product AND for a NAND
    k = next(i for i, g in enumerate(nl.gates) if g.name == "pp_1_2")
    g = nl.gates[k]
    bad = Gate(g.name, "NAND", g.inputs, g.output)
    nl.gates[k] = bad
    nl.driver[g.output] = bad
    rep = check_equivalence(nl, "exhaustive")
    assert not rep.passed and rep.mismatches > 0
    cx = rep.counterexample
    a, b = cx["inputs"]["a"], cx["inputs"]["b"]
    assert cx["expected"]["y"] == a * b
    assert cx["got"]["y"] == evaluate_recursive(nl, {"a": a, "b": b})["y"] != a * b
    assert cx["differing_bits"]
    assert "counterexample" in rep.to_json()


def test_random_width32():
    rep = check_equivalence(build(32), "random", n=20_000, seed=9)
    assert rep.passed and rep.vectors == 20_000 + 7 * 7


def test_simulate_agrees_with_recursive():
    nl = build(6, 8)
    rng = np.random.default_rng(3)
    vec = random_inputs(nl.inputs, 1000, 3)
    sim = simulate(nl, vec)["y"]
    ys = from_bits(sim)
    for v in rng.choice(1000, 100, replace=False):
        ins = {p: from_bits(vec[p][v:v + 1])[0] for p in nl.inputs}
        assert evaluate_recursive(nl, ins)["y"] == ys[v]


def test_simulate_shape_errors():
    nl = build(2)
    with pytest.raises(VerifyError):
        simulate(nl, {"a": np.zeros((3, 2), bool), "b": np.zeros((4, 2), bool)})
    with pytest.raises(VerifyError):
        simulate(nl, {"a": np.zeros((3, 3), bool), "b": np.zeros((3, 2), bool)})


def test_input_generators():
    ex = exhaustive_inputs({"a": 2, "b": 3})
    pairs = {(from_bits(ex["a"][k:k + 1])[0], from_bits(ex["b"][k:k + 1])[0])
             for k in range(32)}
    assert pairs == set(itertools.product(range(4), range(8)))
    with pytest.raises(VerifyError):
        exhaustive_inputs({"a": 11, "b": 11})
    corner = corner_inputs({"a": 4, "b": 4})
    assert len(corner["a"]) == 49
    assert any(r.all() for r in corner["a"]) and any(not r.any() for r in corner["a"])


def test_unknown_kind_and_mode():
    nl = build(2)
    with pytest.raises(VerifyError):
        check_equivalence(nl, kind="div")
    with pytest.raises(VerifyError):
        check_equivalence(nl, mode="formal")


# -- brute-force compressor tree oracle -------------------------------------------

@pytest.mark.parametrize("heights,area", [([3], 2), ([4], 3), ([2], 0), ([1, 1], 0),
                                          ([5, 1], 7)])
def test_brute_force_examples(heights, area):
    assert brute_force_ct(heights).area == area


def _pad(x, n):
    return list(x) + [0] * (n - len(x))


def test_brute_force_counts_match_plan():
    r = brute_force_ct([5, 1])
    plans = plan_compressors([5, 1])
    n = max(len(r.min_count), len(plans))
    assert _pad(r.min_count, n) == _pad(plan_counts(plans), n) == _pad([2, 1], n)


def test_brute_force_guard():
    with pytest.raises(VerifyError):
        brute_force_ct([4, 4])
    with pytest.raises(VerifyError):
        brute_force_ct([1, 1, 1, 1, 1])


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=4).filter(lambda h: sum(h) <= 6))
def test_plan_matches_brute_force(heights):
    r = brute_force_ct(heights)
    plans = plan_compressors(heights)
    assert plan_area(plans) == r.area
    n = max(len(r.min_count), len(plans))
    assert _pad(plan_counts(plans), n) == _pad(r.min_count, n)


# -- model enumeration ------------------------------------------------------------

def test_enumerate_model():
    m = ilp.Model()
    for k in range(3):
        m.add_var(f"x{k}", "binary")
    m.add_constraint({"x0": 1, "x1": 1, "x2": 1}, ">=", 2)
    m.set_objective({"x0": 3, "x1": 1, "x2": 2})
    best, arg = enumerate_model(m)
    assert best == 3 and arg == {"x0": 0.0, "x1": 1.0, "x2": 1.0}


def test_enumerate_model_guards():
    m = ilp.Model()
    m.add_var("z", "integer", 0, 3)
    with pytest.raises(VerifyError, match="binary"):
        enumerate_model(m)
    big = ilp.Model()
    for k in range(13):
        big.add_var(f"b{k}", "binary")
    with pytest.raises(VerifyError, match="too many"):
        enumerate_model(big)
