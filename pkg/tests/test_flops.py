import math

import pytest
from hypothesis import given, strategies as st

from block_kaczmarz import flops
from oracles import trial_division_factors


def test_field_factor_values():
    assert flops.field_factor("real") == 1
    assert flops.field_factor("complex") == 4
    with pytest.raises(ValueError):
        flops.field_factor("quaternion")


def test_primitive_tables_real():
    assert flops.dot_flops(7) == 14
    assert flops.axpy_flops(7) == 14
    assert flops.gemv_flops(3, 5) == 30
    assert flops.gram_flops(4, 10) == 2 * 16 * 10
    assert flops.cholesky_flops(6) == pytest.approx((2.0 / 3.0) * 216)
    assert flops.tri_solve_flops(6) == 36
    assert flops.cg_iter_flops(5) == 2 * 25 + 50


def test_primitive_tables_complex_are_four_times_real():
    for k in (1, 3, 17):
        assert flops.dot_flops(k, "complex") == 4 * flops.dot_flops(k)
        assert flops.axpy_flops(k, "complex") == 4 * flops.axpy_flops(k)
    assert flops.gemv_flops(3, 5, "complex") == 4 * flops.gemv_flops(3, 5)
    assert flops.gram_flops(4, 10, "complex") == 4 * flops.gram_flops(4, 10)
    assert flops.cg_iter_flops(5, "complex") == 4 * flops.cg_iter_flops(5)


def test_fft_flops_examples():
    # radix-2 stages only: 8 * n * log2(n)
    assert flops.fft_flops(1) == 0
    assert flops.fft_flops(2) == 16
    assert flops.fft_flops(8) == 8 * 8 * 3
    # 100 = 2^2 * 5^2 -> sum(p-1) = 10
    assert flops.fft_flops(100) == 8000
    # a prime length degrades to the direct transform's stage cost
    assert flops.fft_flops(101) == 8 * 101 * 100
    with pytest.raises(ValueError):
        flops.fft_flops(0)


@given(st.integers(min_value=1, max_value=5000))
def test_fft_flops_matches_trial_division(n):
    expected = 8 * n * sum(p - 1 for p in trial_division_factors(n))
    assert flops.fft_flops(n) == expected


def test_flop_model_simple():
    assert flops.flop_model("simple", 100) == 400.0
    assert flops.flop_model("simple", 1) == 4.0


def test_flop_model_circulant_block():
    # 4*100*log2(100) + 4*100
    assert flops.flop_model("circulant-block", 100) == pytest.approx(
        3057.5424759098897, abs=1e-9
    )
    # power of two: exactly 4*d*(log2(d) + 1)
    assert flops.flop_model("circulant-block", 64) == 4 * 64 * 7


def test_flop_model_errors():
    with pytest.raises(ValueError):
        flops.flop_model("simple", 0)
    with pytest.raises(ValueError):
        flops.flop_model("dense-block", 10)


def test_counter_defaults_model_to_counted():
    c = flops.FlopCounter()
    c.add(100)
    c.add(50, model=10)
    assert c.counted == 150
    assert c.model == 110


@given(
    st.lists(
        st.tuples(
            st.floats(min_value=0, max_value=1e9),
            st.one_of(st.none(), st.floats(min_value=0, max_value=1e9)),
        ),
        max_size=20,
    )
)
def test_counter_is_a_plain_sum(entries):
    c = flops.FlopCounter()
    for counted, model in entries:
        c.add(counted, model=model)
    assert c.counted == pytest.approx(sum(e[0] for e in entries))
    assert c.model == pytest.approx(
        sum(e[0] if e[1] is None else e[1] for e in entries)
    )
