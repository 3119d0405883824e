import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lil_lab import field, gauges
from lil_lab.errors import DomainError, RegimeError
from lil_lab.rng import stream


def test_transform_T_examples():
    g = stream(0, 1)
    x = g.uniform(-3, 3, size=50)
    y = g.uniform(1e-4, 1, size=50)
    assert np.allclose(field.transform_T(field.vertical_log(), x, y), 1.0, atol=1e-12)
    assert np.allclose(field.transform_T(field.harmonic_linear(), np.full(50, 0.3), y), 0.3, atol=1e-14)
    X2 = np.stack([np.full(50, 0.3), x], axis=-1)
    assert np.allclose(field.transform_T(field.harmonic_linear(2), X2, y), 0.3, atol=1e-14)
    assert np.allclose(field.transform_T(field.harmonic_height(), x, y), 0.0, atol=1e-14)


@pytest.mark.parametrize("alpha,shift", [(0.5, 1.0), (1.5, 1.0), (2.0, 3.0)])
def test_vertical_log_power_T_is_constant(alpha, shift):
    # u = (c+L)^a with L = log(1/y):  y u_y = -a (c+L)^(a-1) and
    # int_y^1 h u_hh dh = [(c+L)^a - c^a] + a [(c+L)^(a-1) - c^(a-1)],
    # so T = c^a + a c^(a-1) at every height.
    F = field.vertical_log_power(alpha, shift)
    expected = shift**alpha + alpha * shift ** (alpha - 1)
    y = np.geomspace(1e-8, 1, 30)
    assert np.allclose(field.transform_T(F, 0.0, y), expected, rtol=1e-10)


def test_vertical_integral_closed_form_matches_quadrature():
    F = field.vertical_log_power(1.5, 1.0)
    # the same suppliers without the closed-form hook use batch quadrature
    G = field.ScalarField(1, F._value, F._gradient, F._laplacian, F._laplacian_gradient)
    y = np.geomspace(1e-6, 0.9, 12)
    x = np.zeros(12)
    assert np.allclose(G.vertical_integral(x, y), F.vertical_integral(x, y), rtol=1e-7)


def test_T_rejects_heights_above_one():
    with pytest.raises(DomainError):
        field.transform_T(field.vertical_log(), 0.0, 1.5)
    with pytest.raises(DomainError):
        field.transform_T(field.vertical_log(), 0.0, 0.0)


@pytest.mark.parametrize("F", [field.vertical_log(1), field.vertical_log(2), field.vertical_log_power(0.5),
                               field.harmonic_linear(2), field.harmonic_height(1),
                               field.lacunary_harmonic(np.ones(8))], ids=lambda F: f"{F.name}-{F.dim}")
def test_finite_differences_match_closed_forms(F):
    g = stream(1, 2)
    x = g.uniform(-1, 1, size=(1000, F.dim))
    y = np.exp(g.uniform(math.log(0.01), 0, size=1000))
    assert F.derivative_mode == "closed_form"
    assert field.fd_cross_check(F, x, y).passed(1e-4)


def test_green_identity_examples():
    lin = field.harmonic_linear()
    for R in (field.BlockRegion((0.0,), 1.0, 0.25, 0.5), field.BlockRegion((-3.0,), 0.1, 0.01, 0.07)):
        assert field.green_identity_residual(lin, R) <= 1e-10
    assert field.green_identity_residual(field.vertical_log(), field.BlockRegion((0.0,), 1.0, 0.25, 0.5)) <= 1e-8
    lac = field.lacunary_harmonic([1.0, 1.0, 1.0])
    assert field.green_identity_residual(lac, field.BlockRegion((0.0,), 0.5, 0.1, 0.3)) <= 1e-6


def test_green_identity_two_dimensional_block():
    R = field.BlockRegion((0.2, -0.4), 0.5, 0.05, 0.4)
    for F in (field.vertical_log(2), field.harmonic_linear(2), field.vertical_log_power(1.5, d=2)):
        assert field.green_identity_residual(F, R) <= 1e-8


def test_vertical_variation_bound():
    chk = field.vertical_variation_bound_check(field.vertical_log(), gauges.Constant(1.0),
                                               field.BlockRegion((0.3,), 0.5, 0.01, 0.2))
    assert chk.lhs == pytest.approx(0.0, abs=1e-10) and chk.passed
    lac = field.lacunary_harmonic(np.ones(8))
    C = field.membership_check(lac, gauges.Constant(1.0), gauges.Constant(1.0)).psi_sup
    chk = field.vertical_variation_bound_check(lac, gauges.Constant(C),
                                               field.BlockRegion((0.0,), 2.0**-3, 2.0**-6, 2.0**-3))
    assert chk.passed and chk.slack > 0


def test_horizontal_oscillation():
    psi, eps = gauges.Constant(1.0), gauges.Constant(2.0)
    chk = field.horizontal_oscillation_check(field.harmonic_height(), psi, eps, 0.4, 0.4, 0.1)
    assert chk.lhs == 0.0 and chk.rhs == pytest.approx(2.0)
    chk = field.horizontal_oscillation_check(field.vertical_log(), psi, eps, -0.5, 0.9, 0.01)
    assert chk.lhs == pytest.approx(0.0, abs=1e-12) and chk.passed
    lac = field.lacunary_harmonic(np.ones(8))
    rep = field.membership_check(lac, gauges.Constant(1.0), gauges.Constant(1.0))
    y = 2.0**-5
    for x in np.linspace(-1, 1, 9):
        chk = field.horizontal_oscillation_check(lac, gauges.Constant(rep.psi_sup), gauges.Constant(max(rep.eps_sup, 1e-9)),
                                                 x, x + y, y)
        assert chk.passed


def test_membership_examples():
    rep = field.membership_check(field.vertical_log(), gauges.Constant(1.0), gauges.Constant(2.0))
    assert rep.psi_sup == pytest.approx(1.0, rel=1e-12)
    assert rep.eps_sup == pytest.approx(1.0, rel=1e-12)
    assert rep.belongs
    rep = field.membership_check(field.harmonic_height(), gauges.Constant(0.5), gauges.Constant(1.0))
    assert rep.psi_sup == pytest.approx(2.0, rel=1e-12) and not rep.belongs


def test_membership_vertical_log_power():
    F = field.vertical_log_power(0.5, 1.0)
    g = gauges.ShiftedLogPower(0.5, 1.0)
    rep = field.membership_check(F, g, g)
    assert math.isfinite(rep.psi_sup) and math.isfinite(rep.eps_sup)
    rep2 = field.membership_check(F, g.scaled(rep.psi_sup * 1.001), g.scaled(rep.eps_sup * 1.001))
    assert rep2.belongs


def test_lil_numerator_examples():
    y = math.exp(-16)
    r = field.lil_ratio_field(field.harmonic_height(), gauges.Constant(1.0), 0.0, y)
    assert r == pytest.approx(y / math.sqrt(16 * math.log(math.log(16))), rel=1e-12)
    assert r == pytest.approx(2.8e-8, rel=0.01)


def test_vertical_log_power_numerator_bounded():
    F = field.vertical_log_power(0.5, 1.0)
    psi = gauges.ShiftedLogPower(0.5, 1.0)
    ys = np.exp(-4.0 * np.arange(1, 40))
    nums = np.array([float(field.lil_numerator(F, 0.0, y)) for y in ys])
    # numerator = T + y u_y tends to c^a + a c^(a-1) = 1.5
    assert np.all(np.abs(nums) <= 1.5)
    scaled = nums / np.sqrt([psi.square_function(y) for y in ys])
    assert np.all(np.diff(scaled) < 0)
    # Psi = log(1 + L) never clears e^e at float heights
    with pytest.raises(RegimeError):
        field.lil_ratio_field(F, psi, 0.0, ys[-1])


def test_corrected_numerator():
    assert field.corrected_numerator(gauges.Constant(3.0), math.exp(-5)) == pytest.approx(15.0, rel=1e-12)
    L = 6.0
    n = 10**6
    s = (np.arange(n) + 0.5) * (L / n)
    brute = float(np.sum((1 + s) ** -0.5) * (L / n))
    got = field.corrected_numerator(gauges.ShiftedLogPower(0.5, 1.0), math.exp(-L))
    assert got == pytest.approx(brute, rel=1e-6)
    assert got == pytest.approx(2 * (math.sqrt(1 + L) - 1), rel=1e-9)


class _SlowEps(gauges.GaugeFunction):
    # min(1, sqrt(log log log(1/y) / log(1/y))), frozen below log(1/y) = 16
    def _value(self, y):
        L = np.maximum(-np.log(np.asarray(y, float)), 16.0)
        return np.minimum(1.0, np.sqrt(np.log(np.log(np.log(L))) / L))


def test_corrected_numerator_below_denominator():
    eps, psi = _SlowEps(), gauges.Constant(1.0)
    for L in (16, 64, 256, 700):
        y = math.exp(-L)
        assert field.corrected_numerator(eps, y) < gauges.lil_denominator(psi, y)


def test_limit_average_of_constant_T():
    lows = np.array([[0.0], [0.25], [-1.0]])
    lim = field.t_limit_average(field.vertical_log(), gauges.Constant(1.0), lows, 0.25)
    assert np.allclose(lim.values, 1.0, atol=1e-12)
    # (2d/l) int_0^{y*} psi with y* = l 2^-10
    assert lim.tail_bound == pytest.approx(2 / 0.25 * 0.25 * 2.0**-10, rel=1e-9)


def test_lacunary_cube_average_closed_form_matches_quadrature():
    lac = field.lacunary_harmonic(np.ones(6))
    lows = np.array([[0.1], [0.7]])
    exact = lac.t_average(lows, 0.125, 0.01)
    quad, _ = field.cube_averages(lac, lambda p, h: field.transform_T(lac, p, h), lows, 0.125, 0.01)
    assert np.allclose(exact, quad, rtol=1e-8, atol=1e-12)


def test_unit_lacunary_truncation():
    y_min = 2.0**-20
    F = field.unit_lacunary(y_min)
    assert 2.0 ** len(F.params["coefficients"]) * y_min >= 40
    assert F.tail_bound < 1e-15


def test_horivert_constant_fit_validates():
    lac = field.lacunary_harmonic(np.ones(8))
    C = field.membership_check(lac, gauges.Constant(1.0), gauges.Constant(1.0)).psi_sup
    fb = field.horivert_check(lac, gauges.Constant(C), 2.0**-4, n_cubes=16, seed=3)
    assert fb.passed


def test_from_spec():
    F = field.from_spec({"name": "vertical_log_power", "alpha": 1.5, "shift": 2.0, "d": 2})
    assert F.dim == 2 and F.name == field.vertical_log_power(1.5, 2.0, 2).name
    with pytest.raises(DomainError):
        field.from_spec({"name": "nope"})


@settings(max_examples=30, deadline=None)
@given(a=st.lists(st.floats(-2, 2), min_size=1, max_size=6), x=st.floats(-5, 5), y=st.floats(1e-4, 1.0))
def test_harmonic_T_equals_u_minus_y_uy(a, x, y):
    F = field.lacunary_harmonic(a)
    direct = F.u(x, y) - y * F.grad(x, y)[..., -1]
    assert float(field.transform_T(F, x, y)) == pytest.approx(float(direct), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(lo=st.floats(-3, 3), side=st.floats(0.05, 1.0), fs=st.floats(0.01, 0.9), ft=st.floats(0.05, 1.0))
def test_green_identity_random_lacunary_blocks(lo, side, fs, ft):
    s, t = sorted((fs * side, ft * side))
    if t - s < 1e-6:
        t = s + 1e-3
    R = field.BlockRegion((lo,), side, s, t)
    assert field.green_identity_residual(field.lacunary_harmonic(np.ones(6)), R) <= 1e-6
