import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mulgen.ppg import column_value, generate_and_array, inject_accumulator


def and_terms_per_column(n):
    """Oracle: count the pairs (i, k) with i + k = j."""
    counts = [0] * (2 * n - 1)
    for i in range(n):
        for k in range(n):
            counts[i + k] += 1
    return counts


def test_width2_heights():
    ppm = generate_and_array(2)
    assert ppm.heights == [1, 2, 1]
    assert ppm.total_bits == 4


def test_width8_peak_and_total():
    ppm = generate_and_array(8)
    assert max(ppm.heights) == 8
    assert ppm.heights.index(8) == 7
    assert ppm.total_bits == 64


@pytest.mark.parametrize("n", [2, 3, 5, 8, 16, 33])
def test_heights_match_counting_oracle(n):
    ppm = generate_and_array(n)
    assert ppm.heights == and_terms_per_column(n)
    assert ppm.heights == [min(j + 1, 2 * n - 1 - j) for j in range(2 * n - 1)]


def test_width16_triangle():
    h = generate_and_array(16).heights
    assert h == list(range(1, 17)) + list(range(15, 0, -1))
    assert sum(h) == 256


@pytest.mark.parametrize("n", [0, 1, -3])
def test_invalid_width(n):
    with pytest.raises(ValueError, match="width"):
        generate_and_array(n)


def test_bitrefs_unique_and_placed():
    ppm = inject_accumulator(generate_and_array(6), 12)
    names = [b.name for b in ppm.bits()]
    assert len(names) == len(set(names))
    for j, col in enumerate(ppm.columns):
        assert all(b.column == j for b in col)


def test_accumulator_adds_one_bit_per_column():
    base = generate_and_array(4)
    fused = inject_accumulator(base, 8)
    assert fused.is_fused and fused.acc_width == 8
    assert [a - b for a, b in zip(fused.heights, base.heights + [0])] == [1] * 8
    assert fused.heights == [2, 3, 4, 5, 4, 3, 2, 1]


def test_accumulator_total_bits():
    assert inject_accumulator(generate_and_array(8), 16).total_bits == 80


def test_zero_accumulator_is_noop_with_warning():
    base = generate_and_array(4)
    with pytest.warns(UserWarning):
        same = inject_accumulator(base, 0)
    assert same == base


def test_wide_accumulator_widens_matrix():
    fused = inject_accumulator(generate_and_array(4), 8)
    assert fused.widened  # 8 > 2*4 - 1 columns
    narrow = inject_accumulator(generate_and_array(4), 7)
    assert not narrow.widened


def test_accumulator_too_wide():
    with pytest.raises(ValueError):
        inject_accumulator(generate_and_array(4), 9)


def test_double_injection_rejected():
    fused = inject_accumulator(generate_and_array(4), 4)
    with pytest.raises(ValueError):
        inject_accumulator(fused, 4)


def test_result_width():
    assert generate_and_array(8).result_width == 16
    assert inject_accumulator(generate_and_array(8), 16).result_width == 17


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 12), st.data())
def test_weighted_column_sum_is_product(n, data):
    a = data.draw(st.integers(0, (1 << n) - 1))
    b = data.draw(st.integers(0, (1 << n) - 1))
    assert column_value(generate_and_array(n), a, b) == a * b


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 10), st.data())
def test_fused_weighted_sum_is_mac(n, data):
    acc = data.draw(st.integers(1, 2 * n))
    a = data.draw(st.integers(0, (1 << n) - 1))
    b = data.draw(st.integers(0, (1 << n) - 1))
    c = data.draw(st.integers(0, (1 << acc) - 1))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ppm = inject_accumulator(generate_and_array(n), acc)
    assert column_value(ppm, a, b, c) == a * b + c
