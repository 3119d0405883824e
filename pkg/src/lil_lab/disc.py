"""Analytic self-maps of the unit disc and their hyperbolic square functions.

Hyperbolic distance uses the metric 2|dz|/(1-|z|^2), so d_h(0, t) =
log((1+t)/(1-t)).  With this normalization -log(1-|f|^2) and d_h(f, 0)
differ by 2 log(1+|f|) <= 2 log 2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import rng
from .errors import DomainError, RegimeError, SaturationError
from .field import ScalarField

METRIC = "2|dz|/(1-|z|^2)"
SATURATION = 1e-14
SPLIT = 0.1


class DiscMap:
    """An analytic map of the disc with value, first and second derivatives."""

    def __init__(self, value, deriv, second, kind, params=None):
        self._f, self._df, self._d2f = value, deriv, second
        self.kind = kind
        self.params = params or {}

    def __repr__(self):
        return f"DiscMap({self.kind}, {self.params})"

    def __call__(self, z):
        return self._f(np.asarray(z, complex))

    def deriv(self, z):
        return self._df(np.asarray(z, complex))

    def second(self, z):
        return self._d2f(np.asarray(z, complex))


def identity():
    return DiscMap(lambda z: z, lambda z: np.ones_like(z), lambda z: np.zeros_like(z), "identity")


def constant(c=0.0):
    c = complex(c)
    if abs(c) >= 1:
        raise DomainError("constant must lie in the disc")
    return DiscMap(lambda z: np.full_like(z, c), lambda z: np.zeros_like(z),
                   lambda z: np.zeros_like(z), "constant", {"c": c})


def monomial(k):
    k = int(k)
    if k < 1:
        raise DomainError("monomial degree must be >= 1")
    return DiscMap(lambda z: z**k, lambda z: k * z ** (k - 1),
                   lambda z: k * (k - 1) * z ** (k - 2) if k > 1 else np.zeros_like(z),
                   "monomial", {"k": k})


def blaschke(zeros, unimodular=1.0):
    """lambda * prod (z - a)/(1 - conj(a) z); derivatives by the product rule.

    The product rule (rather than the logarithmic derivative f'/f) stays
    exact at and near the zeros, where f/b_k would divide by zero.
    """
    a = np.atleast_1d(np.asarray(zeros, complex))
    lam = complex(unimodular)
    if np.any(np.abs(a) >= 1) or abs(abs(lam) - 1) > 1e-12:
        raise DomainError("zeros must lie in the disc and the factor must be unimodular")

    def factors(z):
        den = 1 - np.conj(a) * z[..., None]
        k = 1 - np.abs(a) ** 2
        return (z[..., None] - a) / den, k / den**2, 2 * np.conj(a) * k / den**3

    def others(b, skip):
        out = np.ones(b.shape[:-1], complex)
        for j in range(b.shape[-1]):
            if j not in skip:
                out = out * b[..., j]
        return out

    def value(z):
        return lam * np.prod(factors(z)[0], axis=-1)

    def deriv(z):
        b, db, _ = factors(z)
        return lam * sum(db[..., k] * others(b, {k}) for k in range(len(a)))

    def second(z):
        b, db, d2b = factors(z)
        m = len(a)
        out = sum(d2b[..., k] * others(b, {k}) for k in range(m))
        for k in range(m):
            for l in range(m):
                if k != l:
                    out = out + db[..., k] * db[..., l] * others(b, {k, l})
        return lam * out

    return DiscMap(value, deriv, second, "blaschke", {"zeros": a.tolist(), "unimodular": lam})


def compose(f, g):
    """f o g."""
    return DiscMap(lambda z: f(g(z)),
                   lambda z: f.deriv(g(z)) * g.deriv(z),
                   lambda z: f.second(g(z)) * g.deriv(z) ** 2 + f.deriv(g(z)) * g.second(z),
                   "composition", {"outer": f.kind, "inner": g.kind})


def automorphism(a, theta=0.0):
    """z -> e^{i theta} (z - a)/(1 - conj(a) z), a one-zero Blaschke product."""
    return blaschke([a], np.exp(1j * theta))


def random_blaschke(seed, degree, radius=0.95, label=0):
    g = rng.stream(seed, label)
    r = radius * np.sqrt(g.uniform(size=degree))
    th = g.uniform(0, 2 * np.pi, size=degree)
    return blaschke(r * np.exp(1j * th), np.exp(1j * g.uniform(0, 2 * np.pi)))


def from_spec(spec):
    kind = spec["kind"]
    if kind == "identity":
        return identity()
    if kind == "monomial":
        return monomial(spec["k"])
    if kind == "constant":
        return constant(complex(*spec.get("c", [0.0, 0.0])))
    if kind == "blaschke":
        zeros = [complex(re, im) for re, im in spec["zeros"]]
        return blaschke(zeros, np.exp(1j * spec.get("phase", 0.0)))
    raise DomainError(f"unknown disc map {kind!r}")


# -- hyperbolic geometry ------------------------------------------------------------

def _check_disc(*zs):
    for z in zs:
        if np.any(np.abs(z) >= 1):
            raise DomainError("points must lie in the open unit disc")


def pseudo_distance(z, w):
    """rho = |z - w| / |1 - conj(z) w|."""
    z, w = np.asarray(z, complex), np.asarray(w, complex)
    _check_disc(z, w)
    return np.abs(z - w) / np.abs(1 - np.conj(z) * w)


def hyperbolic_distance(z, w):
    out = 2 * np.arctanh(pseudo_distance(z, w))
    return float(out) if np.ndim(out) == 0 else out


def hyperbolic_derivative(f, z):
    """(1 - |z|^2) |f'(z)| / (1 - |f(z)|^2)."""
    z = np.asarray(z, complex)
    _check_disc(z)
    fz = f(z)
    gap = 1 - np.abs(fz) ** 2
    if np.any(gap <= SATURATION):
        raise SaturationError("|f(z)| numerically equal to 1", partial=None)
    out = (1 - np.abs(z) ** 2) * np.abs(f.deriv(z)) / gap
    return float(out) if np.ndim(out) == 0 else out


def pullback_potential(f, z):
    """u(z) = -log(1 - |f(z)|^2)."""
    return -np.log1p(-np.abs(f(np.asarray(z, complex))) ** 2)


def pullback_laplacian(f, z):
    """4 |f'|^2 / (1 - |f|^2)^2, the exact Laplacian of -log(1 - |f|^2)."""
    z = np.asarray(z, complex)
    return 4 * np.abs(f.deriv(z)) ** 2 / (1 - np.abs(f(z)) ** 2) ** 2


def fd_laplacian(func, z, h):
    z = np.asarray(z, complex)
    return (func(z + h) + func(z - h) + func(z + 1j * h) + func(z - 1j * h) - 4 * func(z)) / h**2


def laplacian_identity_error(f, z, step=3e-3):
    """Worst gap between a five-point Laplacian of -log(1-|f|^2) and the exact
    4|f'|^2/(1-|f|^2)^2, relative to the Schwarz-Pick envelope 4/(1-|z|^2)^2.

    The envelope bounds the exact value, and it stays away from zero at
    critical points of f, where a pure relative error is meaningless.
    """
    z = np.asarray(z, complex)
    _check_disc(z)
    h = step * (1 - np.abs(z))
    fd = fd_laplacian(lambda q: pullback_potential(f, q), z, h)
    envelope = 4 / (1 - np.abs(z) ** 2) ** 2
    return float(np.max(np.abs(fd - pullback_laplacian(f, z)) / envelope))


# -- square function -----------------------------------------------------------------

def _quad(g, a, b, partial):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(g, a, b, limit=500, epsrel=1e-10, epsabs=1e-13)
        except integrate.IntegrationWarning as exc:
            raise SaturationError(f"radial integral did not converge: {exc}", partial=partial)
    return val


def a_squared_f(f, xi, r):
    """int_0^r 4 log(1/t) |f'(t xi)|^2 / (1 - |f(t xi)|^2)^2 dt.

    The piece below 0.1 is done in s = log(1/t) (integrable log singularity),
    the rest in sigma = log(1/(1-t)), which keeps the integrand bounded as
    r -> 1 for maps with finite angular derivative.
    """
    xi = complex(xi)
    if not 0 < r < 1:
        raise DomainError("radius must lie in (0, 1)")
    if abs(abs(xi) - 1) > 1e-12:
        raise DomainError("direction must be unimodular")

    def density(t):
        z = t * xi
        gap = 1 - abs(complex(f(z))) ** 2
        if gap <= SATURATION:
            raise SaturationError("integrand saturated on the radius", partial=None)
        return 4 * abs(complex(f.deriv(z))) ** 2 / gap**2

    def inner(s):
        t = math.exp(-s)
        return s * density(t) * t

    def outer(sig):
        t = -math.expm1(-sig)
        return -math.log(t) * density(t) * (1 - t)

    lo = min(r, SPLIT)
    total = 0.0
    try:
        total = _quad(inner, -math.log(lo), math.inf, 0.0)
        if r > SPLIT:
            total += _quad(outer, -math.log1p(-SPLIT), -math.log1p(-r), total)
    except SaturationError as exc:
        raise SaturationError(str(exc), partial=total) from None
    return total


def _guard(r):
    L = -math.log1p(-r)
    if not L > math.e:
        raise RegimeError("log(1/(1-r)) must exceed e for the log log log factor")
    return L


def disc_lil_ratio(f, xi, r, a2=None):
    """|d_h(f(r xi), 0) - A^2(f)(xi, r)| / sqrt(L log log L), L = log(1/(1-r))."""
    L = _guard(r)
    a2 = a_squared_f(f, xi, r) if a2 is None else a2
    dh = hyperbolic_distance(complex(f(r * complex(xi))), 0j)
    return abs(dh - a2) / math.sqrt(L * math.log(math.log(L)))


@dataclass
class LowerBoundReport:
    radii: np.ndarray
    inf_by_radius: np.ndarray
    inf_ratio: float
    refined_inf_ratio: float

    @property
    def stable(self):
        return abs(self.refined_inf_ratio - self.inf_ratio) <= 0.05 * self.inf_ratio

    @property
    def passed(self):
        return self.inf_ratio > 0 and self.stable


def _ratio_grid(f, directions, radii):
    out = np.empty((len(directions), len(radii)))
    for i, xi in enumerate(directions):
        for j, r in enumerate(radii):
            out[i, j] = a_squared_f(f, xi, r) / -math.log1p(-r)
    return out


def blaschke_lower_bound_check(f, radii, directions):
    """inf of A^2(f)(xi, r) / log(1/(1-r)) over directions and the radius ladder.

    Stability: the ladder is refined by inserting the midpoints in
    log(1/(1-r)); the refined infimum must agree within 5%.
    """
    if f.kind != "blaschke":
        raise DomainError("precondition violated: a finite Blaschke product is required")
    radii = np.sort(np.asarray(radii, float))
    L = -np.log1p(-radii)
    mids = -np.expm1(-0.5 * (L[1:] + L[:-1]))
    grid = _ratio_grid(f, directions, radii)
    fine = np.concatenate([grid, _ratio_grid(f, directions, mids)], axis=1) if len(mids) else grid
    return LowerBoundReport(radii, grid.min(axis=0), float(grid.min()), float(fine.min()))


def directions(n, seed=None):
    """n equally spaced unit directions, or n random ones when ``seed`` is given."""
    if seed is None:
        th = 2 * np.pi * np.arange(n) / n
    else:
        th = rng.stream(seed, 0x646972).uniform(0, 2 * np.pi, size=n)
    return np.exp(1j * th)


# -- half-space transplant ----------------------------------------------------------

def disc_pull_field(f):
    """U(x, y) = -log(1 - |g|^2) with g = f o phi and phi(w) = (w - i)/(w + i).

    With D = lap U = 4|g'|^2/(1-|g|^2)^2 and Wirtinger derivatives,
    grad U = (2 Re dU/dw, -2 Im dU/dw) where dU/dw = conj(g) g'/(1-|g|^2), and
    dD/dw = 4 conj(g') [g''/(1-|g|^2)^2 + 2 g'^2 conj(g)/(1-|g|^2)^3].
    """

    def parts(x, y):
        w = x[..., 0] + 1j * y
        p = (w - 1j) / (w + 1j)
        dp = 2j / (w + 1j) ** 2
        d2p = -4j / (w + 1j) ** 3
        g, f1, f2 = f(p), f.deriv(p), f.second(p)
        g1 = f1 * dp
        g2 = f2 * dp**2 + f1 * d2p
        return g, g1, g2, 1 - np.abs(g) ** 2

    def value(x, y):
        g, *_ = parts(x, y)
        return -np.log1p(-np.abs(g) ** 2)

    def grad(x, y):
        g, g1, _, gap = parts(x, y)
        dw = np.conj(g) * g1 / gap
        return np.stack([2 * dw.real, -2 * dw.imag], axis=-1)

    def lap(x, y):
        g, g1, _, gap = parts(x, y)
        return 4 * np.abs(g1) ** 2 / gap**2

    def lap_grad(x, y):
        g, g1, g2, gap = parts(x, y)
        dD = 4 * np.conj(g1) * (g2 / gap**2 + 2 * g1**2 * np.conj(g) / gap**3)
        return np.stack([2 * dD.real, -2 * dD.imag], axis=-1)

    return ScalarField(1, value, grad, lap, lap_grad, name=f"disc_pull[{f.kind}]")
