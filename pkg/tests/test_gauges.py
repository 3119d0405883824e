import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lil_lab import gauges
from lil_lab.errors import DomainError, RegimeError


def test_evaluation_examples():
    assert gauges.Constant(1.0)(0.5) == 1.0
    assert gauges.PowerLaw(0.5)(0.25) == pytest.approx(2.0, rel=1e-15)
    assert gauges.ShiftedLogPower(0.5, 1.0)(math.exp(-3)) == pytest.approx(0.5, rel=1e-15)


def test_diagnose_constant():
    dg = gauges.diagnose(gauges.Constant(1.0))
    assert dg.averaging_constant_estimate == pytest.approx(1.0, abs=1e-6)
    assert dg.doubling_constant_estimate == pytest.approx(1.0)
    assert dg.nonincreasing and dg.passes


def test_diagnose_power_law_averaging_constant():
    # (1/y) int_0^y t^(-1/2) dt / y^(-1/2) = 2
    dg = gauges.diagnose(gauges.PowerLaw(0.5))
    assert dg.averaging_constant_estimate == pytest.approx(2.0, abs=1e-4)


def test_diagnose_flags_increasing_table():
    g = gauges.Tabulated(((1.0, 1.0), (0.5, 0.5)))
    assert not gauges.diagnose(g).nonincreasing


def test_square_function_constant():
    assert gauges.Constant(1.0).square_function(math.exp(-4)) == pytest.approx(4.0, rel=1e-14)
    assert gauges.Constant(3.0).square_function(math.exp(-2)) == pytest.approx(18.0, rel=1e-14)


@pytest.mark.parametrize("g", [gauges.Constant(2.0), gauges.PowerLaw(0.3), gauges.ShiftedLogPower(1.5),
                               gauges.Tabulated(((1.0, 1.0), (0.1, 2.0), (1e-4, 3.0)))])
def test_square_function_vanishes_at_one(g):
    assert g.square_function(1.0) == 0.0


def test_square_function_matches_riemann_sum():
    # midpoint rule on 10^6 nodes in s = log(1/t); the integrand is smooth in s
    g = gauges.ShiftedLogPower(0.5, 1.0)
    L = 3.0
    n = 10**6
    s = (np.arange(n) + 0.5) * (L / n)
    brute = float(np.sum(g._value_s(s) ** 2) * (L / n))
    assert g.square_function(math.exp(-L)) == pytest.approx(brute, rel=1e-6)
    assert brute == pytest.approx(math.log(4.0), rel=1e-6)


def test_lil_denominator_examples():
    expected = math.sqrt(16 * math.log(math.log(16)))
    assert gauges.lil_denominator(gauges.Constant(1.0), math.exp(-16)) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(4.03937, abs=1e-5)
    with pytest.raises(RegimeError):
        gauges.lil_denominator(gauges.Constant(1.0), math.exp(-2))


def test_lil_denominator_power_law_closed_form():
    y = 2.0**-20
    Psi = (y**-0.6 - 1) / 0.6
    got = gauges.lil_denominator(gauges.PowerLaw(0.3), y)
    assert got == pytest.approx(math.sqrt(Psi * math.log(math.log(Psi))), rel=1e-12)


def test_power_law_square_function_closed_form():
    g = gauges.PowerLaw(0.3)
    for y in (2.0**-20, 1e-3, 0.5):
        Psi = (y**-0.6 - 1) / 0.6
        assert g.square_function(y) == pytest.approx(Psi, rel=1e-12)


def test_invalid_gauges():
    with pytest.raises(DomainError):
        gauges.Constant(0.0)
    with pytest.raises(DomainError):
        gauges.Tabulated(((0.5, 1.0), (1.0, 2.0)))
    with pytest.raises(DomainError):
        gauges.diagnose(gauges.Constant(1.0), grid_size=4)


def test_from_spec_round_trip():
    g = gauges.from_spec({"kind": "shifted_log_power", "alpha": 1.5, "shift": 2.0, "scale": 3.0})
    ref = gauges.ShiftedLogPower(1.5, 2.0)
    assert g(1e-5) == pytest.approx(3.0 * ref(1e-5))


@settings(max_examples=50, deadline=None)
@given(B=st.floats(0.1, 10), L=st.floats(0.01, 50))
def test_constant_square_function_property(B, L):
    assert gauges.Constant(B).square_function(math.exp(-L)) == pytest.approx(B * B * L, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.2, 2.5), shift=st.floats(0.5, 4), L1=st.floats(0.1, 30), dL=st.floats(0.01, 20))
def test_square_function_monotone_with_sandwich(alpha, shift, L1, dL):
    g = gauges.ShiftedLogPower(alpha, shift)
    y1, y2 = math.exp(-L1), math.exp(-L1 - dL)
    gap = g.square_function(y2) - g.square_function(y1)
    lo, hi = sorted((g(y1) ** 2, g(y2) ** 2))
    # psi is monotone on [y2, y1], so the increment is sandwiched by the endpoint values
    assert lo * dL * (1 - 1e-7) <= gap <= hi * dL * (1 + 1e-7)
