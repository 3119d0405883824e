"""Invariant suites, one per module, runnable from the command line.

Each suite returns a list of :class:`Check` records; a suite passes when all
of its checks do.  Suites are sized to finish in well under a minute.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import cascade, disc, field, gauges, martingale, threshold
from .rng import stream


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    bound: float

    def as_row(self):
        return {"check": self.name, "passed": self.passed, "value": self.value, "bound": self.bound}


def _check(name, value, bound, passed=None):
    value, bound = float(value), float(bound)
    return Check(name, bool(value <= bound) if passed is None else bool(passed), value, bound)


# -- gauges ---------------------------------------------------------------------------

SAMPLE_GAUGES = (gauges.Constant(1.0), gauges.Constant(2.5), gauges.ShiftedLogPower(1.5),
                 gauges.ShiftedLogPower(2.0, 2.0), gauges.PowerLaw(0.3))


def gauges_suite(seed=0):
    out = []
    ys = 2.0 ** -np.arange(1, 40, 0.5)
    for g in SAMPLE_GAUGES:
        dg = gauges.diagnose(g)
        A = dg.averaging_constant_estimate
        Psi = np.array([g.square_function(y) for y in ys])
        Psi_half = np.array([g.square_function(y / 2) for y in ys])
        psi = g(ys)
        out.append(_check(f"{g!r}: doubling <= 2A", dg.doubling_constant_estimate, 2 * A * (1 + 1e-9)))
        out.append(_check(f"{g!r}: Psi non-increasing", np.max(np.diff(Psi[::-1])), 0.0))
        out.append(_check(f"{g!r}: Psi >= psi(1)^2 log(1/y)",
                          np.max(g(1.0) ** 2 * -np.log(ys) - Psi), 1e-9 * Psi.max()))
        out.append(_check(f"{g!r}: Psi >= log2/(4A^2) psi^2",
                          np.max(math.log(2) / (4 * A**2) * psi**2 / Psi), 1.0))
        out.append(_check(f"{g!r}: Psi(y/2) <= (1+16A^4) Psi(y)",
                          np.max(Psi_half / Psi), 1 + 16 * A**4))
    for g in (gauges.Constant(1.7), gauges.PowerLaw(0.3)):
        quad = np.array([gauges.GaugeFunction.square_function(g, y) for y in ys])
        closed = np.array([g.square_function(y) for y in ys])
        out.append(_check(f"{g!r}: closed form vs quadrature", np.max(np.abs(quad / closed - 1)), 1e-6))
    return out


# -- field ----------------------------------------------------------------------------

def _random_blocks(g, n, lo=-2.0, hi=2.0, d=1, s_min_frac=1 / 64, floor=0.0):
    out = []
    for _ in range(n):
        l = float(2.0 ** g.uniform(-4, 0))
        s_lo = max(l * s_min_frac, floor)
        s, t = np.sort(np.exp(g.uniform(math.log(s_lo), math.log(l), size=2)))
        out.append(field.BlockRegion(tuple(g.uniform(lo, hi, size=d)), l, float(s), float(t)))
    return out


def closed_form_fields(seed=0):
    """Every built-in field with closed-form derivatives, plus small PoissonLog
    and DiscPull instances.  Returns ``(field, resolution floor)`` pairs."""
    small = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 8, 2))
    return [
        (field.vertical_log(1), 0.0), (field.vertical_log(2), 0.0),
        (field.vertical_log_power(0.5), 0.0), (field.vertical_log_power(1.5), 0.0),
        (field.harmonic_linear(1), 0.0), (field.harmonic_linear(2), 0.0),
        (field.harmonic_height(1), 0.0), (field.harmonic_height(2), 0.0),
        (field.lacunary_harmonic(np.ones(8)), 0.0),
        (cascade.poisson_log_field(small), small.y_floor),
        (disc.disc_pull_field(disc.blaschke([0.5, -0.3 + 0.4j])), 0.0),
    ]


def field_suite(seed=0, n_blocks=10):
    out = []
    g = stream(seed, 11)
    x = g.uniform(-1, 1, size=1000)
    y = g.uniform(1e-3, 1, size=1000)
    out.append(_check("T(vertical_log) == 1", np.max(np.abs(field.transform_T(field.vertical_log(), x, y) - 1)), 1e-6))
    lac = field.lacunary_harmonic(np.ones(8))
    T = field.transform_T(lac, x, y)
    direct = lac.u(x, y) - y * lac.grad(x, y)[..., -1]
    out.append(_check("harmonic T == u - y u_y", np.max(np.abs(T - direct)), 1e-12))
    for F, floor in closed_form_fields(seed):
        res = max(field.green_identity_residual(F, R) for R in _random_blocks(g, n_blocks, d=F.dim, floor=floor))
        out.append(_check(f"green residual {F.name} d={F.dim}", res, 1e-6))
        P = g.uniform(-1, 1, size=(200, F.dim))
        Y = np.exp(g.uniform(math.log(max(0.01, floor)), 0, size=200))
        cc = field.fd_cross_check(F, P, Y)
        worst = max(cc.gradient, cc.laplacian, cc.laplacian_gradient)
        out.append(_check(f"finite differences {F.name} d={F.dim}", worst, 1e-4))
    # averaged vertical bound: |avg_Q (T(t) - T(s))| <= 2 d A psi(l)
    rep = field.membership_check(lac, gauges.Constant(1.0), gauges.Constant(1.0))
    psi = gauges.Constant(rep.psi_sup * 1.001)
    worst = 0.0
    for R in _random_blocks(g, n_blocks):
        chk = field.vertical_variation_bound_check(lac, psi, R)
        worst = max(worst, chk.lhs / (2 * R.dim * 1.0 * psi(min(R.side, 1.0))))
    out.append(_check("cube-average variation <= 2dA psi(l)", worst, 1.0))
    for k0 in (10, 12):
        fb = field.horivert_check(lac, psi, 2.0**-4, seed=seed, k0=k0)
        out.append(Check(f"|T_Q - T(x,y)| <= C psi(l), k0={k0}", fb.passed, fb.validation_max, fb.constant))
    return out


# -- martingale -------------------------------------------------------------------------

def martingale_suite(seed=0):
    out = []
    for d, N in ((1, 12), (2, 6)):
        M = martingale.build_random(d, N, 1.0, seed)
        defect = max(float(np.max(a)) for a in M.mean_defects())
        out.append(_check(f"random martingale mean property d={d}", defect, 0.0))
        x = stream(seed, 21).uniform(size=(64, d))
        qv = M.quadratic_variation(x)
        out.append(_check(f"<T>_n == n d={d}", np.max(np.abs(qv - np.arange(N + 1))), 1e-12))
        ens = martingale.simulate_paths(d, N, 1.0, seed, martingale.digits_of(x, N))
        out.append(_check(f"tree and path simulator agree d={d}",
                          np.max(np.abs(ens.values - M.path_values(x))), 0.0))
    s = 2.0 ** -np.arange(1, 31)
    ens = martingale.simulate_paths(1, 30, s, seed, martingale.random_digits(1, 30, 64, seed))
    out.append(_check("<T> <= 1/3 for s_k = 2^-k", ens.qv[:, -1].max(), 1 / 3 + 1e-15))
    ens = martingale.simulate_paths(1, 2**12, 1.0, seed, martingale.random_digits(1, 2**12, 500, seed))
    st = martingale.lil_statistics(ens, 2**9, 2**12)
    out.append(_check("LIL running ratio > 3 fraction", st.frac_exceeding, 0.01))
    lac = field.unit_lacunary(2.0**-20)
    psi = gauges.Constant(1.5)
    FM = martingale.build_from_field(lac, psi, 10)
    gap = max(float(np.max(a - b)) for a, b in zip(FM.mean_defects(), FM.mean_tolerances()))
    out.append(_check("field martingale defect <= tol_mart", gap, 0.0))
    rep = martingale.increment_bound_check(FM, psi, seed=seed)
    out.append(Check("increment bound (fit/validate)", rep.increments.passed,
                     rep.increments.validation_max, rep.increments.constant))
    out.append(Check("quadratic variation bound (fit/validate)", rep.quadratic.passed,
                     rep.quadratic.validation_max, rep.quadratic.constant))
    fb = martingale.closeness_check(FM, lac, psi, n_min=4, seed=seed)
    out.append(Check("closeness to T_n (fit/validate)", fb.passed, fb.validation_max, fb.constant))
    HL = martingale.build_from_field(field.harmonic_linear(), gauges.Constant(1.0), 8)
    out.append(_check("harmonic_linear martingale exact", max(float(np.max(a)) for a in HL.mean_defects()), 1e-10))
    return out


# -- cascade --------------------------------------------------------------------------

def cascade_suite(seed=0):
    out = []
    m = cascade.CascadeMeasure([0.7, 0.3], 12, 4)
    dev = max(abs(m.total_mass(n) / m.n_units - 1) for n in range(13))
    out.append(_check("mass conservation", dev, 1e-12))
    m2 = cascade.CascadeMeasure([0.4, 0.3, 0.2, 0.1], 5, 2, permutation_seed=seed)
    dev = max(abs(m2.total_mass(n) / m2.n_units - 1) for n in range(6))
    out.append(_check("mass conservation d=2 permuted", dev, 1e-12))
    W = 8
    leb = cascade.PoissonExtension(cascade.lebesgue(10, W))
    g = stream(seed, 31)
    x = g.uniform(-2, 2, size=100)
    y = g.uniform(0.05, 1, size=100)
    exact = (np.arctan((W - x) / y) + np.arctan((W + x) / y)) / np.pi
    ev = leb.evaluate(x, y)
    out.append(_check("Lebesgue extension vs arctan formula",
                      np.max(np.abs(ev.v - exact) - ev.discretization_bound), 1e-6))
    out.append(_check("Lebesgue extension vs 1", np.max(np.abs(ev.v - 1) - ev.truncation_bound), 1e-6))
    P = cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], 10, 4))
    F = cascade.poisson_log_field(P)
    x = g.uniform(-1, 1, size=(100, 1))
    y = np.exp(g.uniform(math.log(P.y_floor * 2), 0, size=100))
    v, gv = P.sums(x, y, 1)
    ident = F.fd_lap(x, y) + np.sum(gv**2, axis=-1) / v**2
    out.append(_check("lap log v + |grad v|^2/v^2 = 0 (FD)",
                      np.max(np.abs(ident) * y**2), 1e-4))
    xs, ys = g.uniform(0, 1, size=300), np.exp(g.uniform(math.log(2.0**-8), 0, size=300))
    h = [cascade.harnack_ratio(cascade.PoissonExtension(cascade.CascadeMeasure([0.7, 0.3], N, W_)), xs, ys).max()
         for N, W_ in ((10, 4), (11, 8))]
    out.append(_check("Harnack sup stable under N, W doubling", abs(h[1] / h[0] - 1), 0.05))
    return out


# -- disc -----------------------------------------------------------------------------

def _disc_points(g, n, radius=0.999):
    return radius * np.sqrt(g.uniform(size=n)) * np.exp(2j * np.pi * g.uniform(size=n))


def disc_suite(seed=0, n_maps=20, n_probes=10**4):
    out = []
    g = stream(seed, 41)
    z, w = _disc_points(g, n_probes), _disc_points(g, n_probes)
    sp = contr = bridge = lap = 0.0
    for i in range(n_maps):
        f = disc.random_blaschke(seed, 1 + i % 8, label=100 + i)
        sp = max(sp, float(np.max(disc.hyperbolic_derivative(f, z))))
        contr = max(contr, float(np.max(disc.hyperbolic_distance(f(z), f(w)) - disc.hyperbolic_distance(z, w))))
        bridge = max(bridge, float(np.max(np.abs(disc.pullback_potential(f, z)
                                                 - disc.hyperbolic_distance(f(z), np.zeros_like(z))))))
        lap = max(lap, disc.laplacian_identity_error(f, z[:1000] * 0.99))
    out.append(_check("Schwarz-Pick", sp, 1 + 1e-9))
    out.append(_check("hyperbolic contraction", contr, 1e-9))
    out.append(_check("bridge |u - d_h(f,0)| <= 2 log 2", bridge, 2 * math.log(2) + 1e-9))
    out.append(_check("Laplacian identity (FD)", lap, 1e-4))
    a = 0.6 * np.exp(2j * np.pi * g.uniform(size=n_probes))
    th = g.uniform(0, 2 * np.pi, size=n_probes)
    phi = lambda q: np.exp(1j * th) * (q - a) / (1 - np.conj(a) * q)
    inv = np.max(np.abs(disc.hyperbolic_distance(phi(z), phi(w)) - disc.hyperbolic_distance(z, w))
                 / np.maximum(1.0, disc.hyperbolic_distance(z, w)))
    out.append(_check("Mobius invariance", inv, 1e-10))
    f = disc.blaschke([0.5, -0.5, 0.5j, -0.5j])
    rep = disc.blaschke_lower_bound_check(f, [1 - 2.0**-k for k in (4, 6, 8)], disc.directions(16))
    out.append(Check("finite Blaschke lower bound", rep.passed, rep.inf_ratio, rep.refined_inf_ratio))
    return out


# -- threshold ----------------------------------------------------------------------------

def threshold_suite(seed=0):
    out = []
    seqs = [threshold.constant(), threshold.power_of_index(1), threshold.power_of_index(0.5),
            threshold.from_gauge(gauges.ShiftedLogPower(1.5)), threshold.geometric(0.5)]
    ks = 2 ** np.arange(8, 21)
    for s in seqs:
        cond = threshold.check_conditions(s)
        mf = threshold.multiplicative_form(s, 4096)
        out.append(_check(f"{s.kind} {s.params}: multiplicative round trip", mf.roundtrip_error, 1e-12))
        if cond.all_hold:
            r = threshold.improvement_ratio_ladder(s, ks)
            out.append(_check(f"{s.kind} {s.params}: ratio decreasing for n >= 2^8",
                              np.nanmax(np.diff(r)), 0.0, passed=bool(np.all(np.diff(r) < 0))))
            out.append(Check(f"{s.kind} {s.params}: (n-1) lambda_n <= sum lambda",
                             mf.sum_dominates and mf.tail_decreasing, 0.0, 0.0))
    cond = threshold.check_conditions(threshold.geometric(0.5))
    out.append(Check("geometric(0.5) fails the threshold", cond.threshold_failed, cond.trend_tail_slope, 0.0))
    rep = threshold.continuous_threshold_check(gauges.ShiftedLogPower(1.5))
    out.append(Check("log-power gauge: continuous ratio decreasing", rep.decreasing, float(np.nanmin(rep.ratio)), 0.0))
    rep = threshold.continuous_threshold_check(gauges.PowerLaw(0.3))
    out.append(Check("power-law gauge: continuous ratio not decreasing", not rep.decreasing,
                     float(np.nanmax(rep.ratio)), 0.0))
    return out


SUITES = {
    "gauges": gauges_suite,
    "field": field_suite,
    "martingale": martingale_suite,
    "cascade": cascade_suite,
    "disc": disc_suite,
    "threshold": threshold_suite,
}


def run(modules=None, seed=0):
    """Run the named suites (all by default); returns ``{module: [Check, ...]}``."""
    names = list(SUITES) if not modules else list(modules)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown module(s): {', '.join(unknown)}")
    return {n: SUITES[n](seed) for n in names}
