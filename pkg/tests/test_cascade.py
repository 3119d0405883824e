import math

import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings, strategies as st

from lil_lab import cascade
from lil_lab.errors import ConfigError, DomainError, RegimeError, ResolutionError
from lil_lab.martingale import DyadicCube


def test_measure_of_examples():
    m = cascade.CascadeMeasure([0.7, 0.3], 6, 2)
    assert m.measure_of(DyadicCube(2, (1,))) == pytest.approx(0.49, rel=1e-15)
    assert m.measure_of(DyadicCube(0, (1,)), unit=-2) == 1.0
    assert m.measure_of(DyadicCube(3, (8,)), unit=1) == pytest.approx(0.3**3)
    leb = cascade.lebesgue(6, 2)
    assert all(leb.measure_of(DyadicCube(n, (k,))) == 2.0**-n for n in range(7) for k in (1, 2**n))


def test_measure_of_errors():
    m = cascade.CascadeMeasure([0.7, 0.3], 4, 2)
    with pytest.raises(DomainError):
        m.measure_of(DyadicCube(5, (1,)))
    with pytest.raises(DomainError):
        m.measure_of(DyadicCube(1, (1,)), unit=2)


def test_invalid_measures():
    with pytest.raises(DomainError):
        cascade.CascadeMeasure([0.7, 0.4], 4)
    with pytest.raises(DomainError):
        cascade.CascadeMeasure([0.2, 0.3, 0.5], 4)
    with pytest.raises(ConfigError):
        cascade.CascadeMeasure([0.7, 0.3], 22, 8)


@pytest.mark.parametrize("weights,W", [([0.7, 0.3], 3), ([0.4, 0.3, 0.2, 0.1], 2)])
def test_mass_conserved_every_generation(weights, W):
    m = cascade.CascadeMeasure(weights, 5, W, permutation_seed=9)
    for n in range(6):
        assert m.total_mass(n) == pytest.approx(m.n_units, rel=1e-12)


def test_permutation_keeps_multiset_of_weights():
    m = cascade.CascadeMeasure([0.7, 0.3], 3, 2, permutation_seed=4)
    kids = m.masses(1).reshape(-1, 2)
    assert np.allclose(np.sort(kids, axis=1), [0.3, 0.7])
    assert not np.allclose(kids[:, 0], 0.7)   # some unit cube got the swapped order


def test_single_point_mass_is_kernel():
    P = cascade.PoissonExtension(cascade.PointMasses([[0.0]], [1.0]))
    x = np.array([0.0, 0.3, -1.7])
    y = np.array([0.1, 0.5, 2.0])
    assert np.allclose(P(x, y), y / (math.pi * (x**2 + y**2)), rtol=1e-14)
    assert cascade.harnack_ratio(P, 0.0, 0.25) == pytest.approx(1.0, rel=1e-14)


def test_point_mass_gradient_matches_differences():
    P = cascade.PoissonExtension(cascade.PointMasses([[0.2, -0.1]], [1.0]))
    x, y, h = np.array([0.5, 0.3]), 0.4, 1e-6
    g = P.grad(x, y)
    fd = [(P(x + h * e, y) - P(x - h * e, y)) / (2 * h) for e in np.eye(2)]
    fd.append((P(x, y + h) - P(x, y - h)) / (2 * h))
    assert np.allclose(g, fd, rtol=1e-6)
    # c_2 = 1/(2 pi) in d = 2: v(t, y) directly above the mass is 1/(2 pi y^2)
    assert P(np.array([0.2, -0.1]), 0.5) == pytest.approx(1 / (2 * math.pi * 0.25), rel=1e-14)


def test_lebesgue_center_value():
    W = 8
    P = cascade.PoissonExtension(cascade.lebesgue(10, W))
    ev = cascade.poisson_eval(P, 0.0, 0.1)
    exact = 2 * math.atan(W / 0.1) / math.pi
    assert abs(float(ev.v) - exact) <= 1e-6
    assert abs(float(ev.v) - 1.0) <= float(ev.truncation_bound) + 1e-6
    assert cascade.harnack_ratio(P, 0.0, 0.01) < 1e-3


def test_positive_and_finite_at_random_probes():
    P = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 10, 4))
    g = np.random.default_rng(3)
    x = g.uniform(-6, 6, size=10**4)
    y = np.exp(g.uniform(math.log(P.y_floor), 0, size=10**4))
    v = P(x, y)
    assert np.all(v > 0) and np.all(np.isfinite(v))
    B = cascade.harnack_ratio(P, x, y).max()
    assert np.isfinite(B) and B < 2.0


def test_resolution_floor():
    P = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 8, 2))
    assert P.y_floor == pytest.approx(4 * 2.0**-8)
    with pytest.raises(ResolutionError):
        P(0.0, 2.0**-9)
    with pytest.raises(ResolutionError):
        cascade.a_squared_v(P, 0.0, 2.0**-9)


def test_sums_do_not_depend_on_batch_shape():
    P = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 12, 4))
    x = np.linspace(-2, 2, 37)
    y = np.full(37, 0.01)
    whole = P(x, y)
    parts = np.concatenate([P(x[i:i + 5], y[i:i + 5]) for i in range(0, 37, 5)])
    assert np.array_equal(whole, parts)


def test_a_squared_of_height_function():
    v = cascade.height_function()
    for y in (0.5, 2.0**-10, 1e-6):
        a2 = cascade.a_squared_v(v, 0.3, y)
        assert a2 == pytest.approx(math.log(1 / y), rel=1e-8, abs=1e-12)
        assert abs(math.log(float(v(0.3, y))) + a2) <= 1e-8


def test_a_squared_of_truncated_lebesgue():
    # at x = 0: v = (2/pi) atan(W/t) and dv/dt = -(2/pi) W/(W^2 + t^2), no horizontal gradient
    W, y = 8, 2.0**-6
    P = cascade.PoissonExtension(cascade.lebesgue(10, W))
    exact, _ = quad(lambda t: t * (W / (W * W + t * t) / math.atan(W / t)) ** 2, y, 1, epsabs=1e-14)
    assert cascade.a_squared_v(P, 0.0, y) == pytest.approx(exact, rel=1e-4)


def test_a_squared_profile_matches_single_evaluations():
    P = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 10, 4))
    X = np.array([[0.31], [0.77]])
    hs = [2.0**-4, 2.0**-7]
    prof = cascade.a_squared_profile(P, X, hs)
    for i in range(2):
        for j, y in enumerate(hs):
            assert prof[i, j] == pytest.approx(cascade.a_squared_v(P, X[i], y), rel=1e-5)


def test_a_squared_lower_ratio_positive():
    P = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 12, 4))
    X = np.random.default_rng(8).uniform(size=(8, 1))
    r = cascade.a_squared_profile(P, X, [2.0**-10])[:, 0] / math.log(2.0**10)
    assert np.all(r > 0) and np.all(r < 2.0)


def test_lower_bound_check_preconditions_and_ordering():
    with pytest.raises(DomainError):
        cascade.cascade_lower_bound_check(cascade.PoissonExtension(cascade.lebesgue(8, 2)), [2.0**-4], 4)
    hs = [2.0**-k for k in range(4, 8)]
    a = cascade.cascade_lower_bound_check(cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 10, 4)),
                                          hs, 10, seed=1)
    b = cascade.cascade_lower_bound_check(cascade.PoissonExtension(cascade.CascadeMeasure([0.9, 0.1], 10, 4)),
                                          hs, 10, seed=1)
    assert a.inf_ratio > 0 and b.inf_ratio > a.inf_ratio
    assert a.step_bound_holds and b.step_bound_holds


def test_log_v_ratio_height_override_is_zero():
    assert cascade.log_v_lil_ratio(cascade.height_function(), 0.2, 2.0**-12) == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(RegimeError):
        cascade.log_v_lil_ratio(cascade.height_function(), 0.2, 0.5)


def test_point_mass_log_ratio_grows():
    # v = 1/(pi y) above the mass: log v + A^2 = log(1/pi) + 2 log(1/y) + O(1) grows
    P = cascade.PoissonExtension(cascade.PointMasses([[0.0]], [1.0]))
    r = [cascade.log_v_lil_ratio(P, 0.0, 2.0**-k) for k in (6, 12, 24)]
    assert r[0] < r[1] < r[2]


def test_log_field_laplacian_identity():
    P = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 8, 2))
    F = cascade.poisson_log_field(P)
    x = np.array([[0.1], [0.6]])
    y = np.array([0.2, 0.05])
    v, g = P.sums(x, y, 1)
    assert np.allclose(F.lap(x, y), -np.sum(g**2, axis=-1) / v**2, rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(0, 6), k=st.integers(1, 64), p=st.floats(0.05, 0.95))
def test_measure_is_product_of_ancestry(n, k, p):
    k = (k - 1) % 2**n + 1
    m = cascade.CascadeMeasure([p, 1 - p], 6, 1)
    bits = [(k - 1) >> (n - 1 - i) & 1 for i in range(n)]
    expected = math.prod(p if b == 0 else 1 - p for b in bits)
    assert m.measure_of(DyadicCube(n, (k,))) == pytest.approx(expected, rel=1e-12)
