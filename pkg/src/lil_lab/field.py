"""Smooth fields on the upper half-space and the transform T.

Points are arrays of shape ``(..., d)`` and heights arrays of shape ``(...)``;
for ``d = 1`` plain scalars or 1-D arrays of abscissae are accepted too.
Every supplier is vectorized over the leading axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .calibration import fit_and_validate
from .errors import DomainError, QuadratureError
from .gauges import lil_denominator


def as_points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise DomainError(f"expected points of dimension {d}")
    return x


class ScalarField:
    """A field u on R^{d+1}_+ with suppliers for u, grad u, lap u, grad lap u.

    Missing suppliers are synthesized by central differences with step
    ``step_scale * y``; each difference is taken of the next lower supplier,
    so a closed-form Laplacian gives a one-step difference for grad lap u.

    Optional hooks:
      ``t_average(lows, side, y)``   exact cube averages of T at height y.
      ``vertical_integral(x, y)``    closed or specialized int_y^1 h lap u dh.
    """

    def __init__(self, dim, value, gradient=None, laplacian=None, laplacian_gradient=None, *,
                 step_scale=1e-4, harmonic=False, name="field", t_average=None,
                 vertical_integral=None, tail_bound=0.0, params=None):
        if dim not in (1, 2):
            raise DomainError("only d = 1 and d = 2 are supported")
        self.dim = dim
        self._value = value
        self._gradient = gradient
        self._laplacian = laplacian
        self._laplacian_gradient = laplacian_gradient
        self.step_scale = step_scale
        self.harmonic = harmonic
        self.name = name
        self.t_average = t_average
        self._vertical_integral = vertical_integral
        self.tail_bound = tail_bound
        self.params = params or {}

    def __repr__(self):
        return f"ScalarField({self.name}, d={self.dim}, {self.derivative_mode})"

    @property
    def derivative_mode(self):
        closed = all(s is not None for s in
                     (self._gradient, self._laplacian, self._laplacian_gradient))
        return "closed_form" if closed else "finite_difference"

    def _prep(self, x, y):
        x = as_points(x, self.dim)
        y = np.asarray(y, dtype=float)
        if np.any(~(y > 0)):
            raise DomainError("heights must be positive")
        shape = np.broadcast_shapes(x.shape[:-1], y.shape)
        return np.broadcast_to(x, shape + (self.dim,)), np.broadcast_to(y, shape)

    # -- suppliers -------------------------------------------------------
    def u(self, x, y):
        x, y = self._prep(x, y)
        return np.asarray(self._value(x, y), float)

    def grad(self, x, y):
        x, y = self._prep(x, y)
        if self._gradient is not None:
            return np.asarray(self._gradient(x, y), float)
        return self._fd_first(self._value, x, y)

    def lap(self, x, y):
        x, y = self._prep(x, y)
        if self._laplacian is not None:
            return np.asarray(self._laplacian(x, y), float)
        return self._fd_laplacian(x, y)

    def lap_grad(self, x, y):
        x, y = self._prep(x, y)
        if self._laplacian_gradient is not None:
            return np.asarray(self._laplacian_gradient(x, y), float)
        return self._fd_first(lambda a, b: self.lap(a, b), x, y)

    # finite-difference versions, always available for cross-checks
    def fd_grad(self, x, y):
        return self._fd_first(self._value, *self._prep(x, y))

    def fd_lap(self, x, y):
        return self._fd_laplacian(*self._prep(x, y))

    def fd_lap_grad(self, x, y):
        return self._fd_first(lambda a, b: self.lap(a, b), *self._prep(x, y))

    def _shifts(self, x, y):
        h = self.step_scale * y
        for j in range(self.dim + 1):
            e = np.zeros(self.dim + 1)
            e[j] = 1.0
            dx = h[..., None] * e[:-1]
            dy = h * e[-1]
            yield h, (x + dx, y + dy), (x - dx, y - dy)

    def _fd_first(self, func, x, y):
        cols = [(np.asarray(func(*p), float) - np.asarray(func(*m), float)) / (2 * h)
                for h, p, m in self._shifts(x, y)]
        return np.stack(cols, axis=-1)

    def _fd_laplacian(self, x, y):
        u0 = np.asarray(self._value(x, y), float)
        out = np.zeros_like(u0)
        for h, p, m in self._shifts(x, y):
            out += (np.asarray(self._value(*p), float) - 2 * u0 + np.asarray(self._value(*m), float)) / h**2
        return out

    # -- vertical integral int_y^top h lap u(x, h) dh -----------------------
    def vertical_integral(self, x, y, top=1.0):
        x, y = self._prep(x, y)
        if self.harmonic:
            return np.zeros(y.shape)
        if self._vertical_integral is not None and top == 1.0:
            return np.asarray(self._vertical_integral(x, y), float)
        shape = y.shape
        xf = x.reshape(-1, self.dim)
        yf = y.reshape(-1)
        out = np.zeros(len(yf))
        for start in range(0, len(yf), 256):
            xs, ys = xf[start:start + 256], yf[start:start + 256]

            def integrand(t, xs=xs):
                return t * self.lap(xs[:, None, :], t)

            vals, _ = quadrature.integrate_log_batch(integrand, ys, top, rtol=1e-10, atol=1e-10)
            out[start:start + 256] = vals
        return out.reshape(shape)


@dataclass(frozen=True)
class CrossCheck:
    gradient: float
    laplacian: float
    laplacian_gradient: float

    def passed(self, rtol=1e-4):
        return max(self.gradient, self.laplacian, self.laplacian_gradient) <= rtol


def fd_cross_check(F, x, y):
    """Worst relative gap between the field's suppliers and central differences.

    Each gap is scaled by ``max(|closed form|, ref)`` where ``ref`` is the
    natural size of a k-th derivative at height y,
    ``(|u| + y|grad u|) / y**k`` (and ``|lap u| / y`` for grad lap u), so that
    components which vanish identically do not divide by zero.
    """
    x, y = F._prep(x, y)
    u = np.abs(F.u(x, y))
    g = F.grad(x, y)
    scale0 = u + y * np.linalg.norm(g, axis=-1)
    lap = F.lap(x, y)
    lg = F.lap_grad(x, y)

    def worst(fd, cf, ref):
        den = np.maximum(np.abs(cf), ref[..., None] if cf.ndim > ref.ndim else ref)
        den = np.where(den > 0, den, 1.0)
        return float(np.max(np.abs(fd - cf) / den))

    return CrossCheck(worst(F.fd_grad(x, y), g, scale0 / y),
                      worst(F.fd_lap(x, y), lap, scale0 / y**2),
                      worst(F.fd_lap_grad(x, y), lg, np.abs(lap) / y + scale0 / y**3 * 1e-3))


# ----------------------------------------------------------------------------
# built-in fields

def _zeros_like_x(x):
    return np.zeros(x.shape[:-1])


def vertical_log(d=1):
    """u = log(1/y): maximal vertical Bloch growth, lap u = y^-2."""

    def grad(x, y):
        g = np.zeros(x.shape[:-1] + (d + 1,))
        g[..., -1] = -1.0 / y
        return g

    def lap_grad(x, y):
        g = np.zeros(x.shape[:-1] + (d + 1,))
        g[..., -1] = -2.0 / y**3
        return g

    return ScalarField(d, lambda x, y: -np.log(y) + _zeros_like_x(x), grad,
                       lambda x, y: 1.0 / y**2 + _zeros_like_x(x), lap_grad, name="vertical_log",
                       vertical_integral=lambda x, y: -np.log(y) + _zeros_like_x(x),
                       t_average=lambda lows, side, y: np.ones(len(np.atleast_2d(lows))))


def vertical_log_power(alpha, shift=1.0, d=1):
    """u = (shift + log(1/y)) ** alpha."""
    a, c = float(alpha), float(shift)

    def w(y):
        return c - np.log(y)

    def g(y):
        return a * w(y) ** (a - 1) + a * (a - 1) * w(y) ** (a - 2)

    def gprime(y):
        return a * (a - 1) * w(y) ** (a - 2) + a * (a - 1) * (a - 2) * w(y) ** (a - 3)

    def grad(x, y):
        out = np.zeros(x.shape[:-1] + (d + 1,))
        out[..., -1] = -a * w(y) ** (a - 1) / y
        return out

    def lap_grad(x, y):
        out = np.zeros(x.shape[:-1] + (d + 1,))
        out[..., -1] = -(2 * g(y) + gprime(y)) / y**3
        return out

    def vint(x, y):
        # int_y^1 g(h)/h dh with w = c + log(1/h)
        prim = lambda v: v**a + a * v ** (a - 1)
        return prim(w(y)) - prim(c) + _zeros_like_x(x)

    def t_average(lows, side, y):
        T = w(y) ** a + a * w(y) ** (a - 1) - vint(np.zeros((1, d)), np.array([y]))[0]
        return np.full(len(np.atleast_2d(lows)), float(T))

    return ScalarField(d, lambda x, y: w(y) ** a + _zeros_like_x(x), grad,
                       lambda x, y: g(y) / y**2 + _zeros_like_x(x), lap_grad,
                       name="vertical_log_power", params={"alpha": a, "shift": c},
                       vertical_integral=vint, t_average=t_average)


def _harmonic_box_average_linear(lows, side, y):
    return np.atleast_2d(np.asarray(lows, float))[:, 0] + 0.5 * side


def harmonic_linear(d=1):
    """u = x_1."""

    def grad(x, y):
        g = np.zeros(x.shape[:-1] + (d + 1,))
        g[..., 0] = 1.0
        return g

    zero = lambda x, y: np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(y)))
    zvec = lambda x, y: np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(y)) + (d + 1,))
    return ScalarField(d, lambda x, y: x[..., 0] + 0 * y, grad, zero, zvec,
                       harmonic=True, name="harmonic_linear", t_average=_harmonic_box_average_linear)


def harmonic_height(d=1):
    """u = y."""

    def grad(x, y):
        g = np.zeros(x.shape[:-1] + (d + 1,))
        g[..., -1] = 1.0
        return g

    zero = lambda x, y: np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(y)))
    zvec = lambda x, y: np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(y)) + (d + 1,))
    return ScalarField(d, lambda x, y: y + _zeros_like_x(x), grad, zero, zvec,
                       harmonic=True, name="harmonic_height",
                       t_average=lambda lows, side, y: np.zeros(len(np.atleast_2d(lows))))


def lacunary_harmonic(coefficients, y_min=None):
    """u = sum_k a_k exp(-2^k y) cos(2^k x), d = 1, with k = 0, 1, ... the list index.

    ``tail_bound`` is zero for an explicit finite list.  Use
    :func:`unit_lacunary` for the truncated infinite unit-coefficient series.
    """
    a = np.asarray(coefficients, dtype=float)
    w = 2.0 ** np.arange(len(a))

    def value(x, y):
        y = y[..., None]
        return np.sum(a * np.exp(-w * y) * np.cos(w * x), axis=-1)

    def grad(x, y):
        y = y[..., None]
        damp = a * w * np.exp(-w * y)
        gx = -np.sum(damp * np.sin(w * x), axis=-1)
        gy = -np.sum(damp * np.cos(w * x), axis=-1)
        return np.stack([gx, gy], axis=-1)

    def t_average(lows, side, y):
        lows = np.asarray(lows, float).reshape(-1, 1)
        amp = a * (1.0 + w * y) * np.exp(-w * y)
        s = (np.sin(w * (lows + side)) - np.sin(w * lows)) / (w * side)
        return s @ amp

    zero = lambda x, y: np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(y)))
    zvec = lambda x, y: np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(y)) + (2,))
    return ScalarField(1, value, grad, zero, zvec, harmonic=True, name="lacunary_harmonic",
                       t_average=t_average, params={"coefficients": a.tolist()})


def lacunary_terms(y_min):
    """Number of terms K with 2^K * y_min >= 40."""
    return max(1, int(math.ceil(math.log2(40.0 / y_min))))


def unit_lacunary(y_min):
    """Unit-coefficient lacunary series truncated for heights >= y_min.

    ``tail_bound`` bounds the dropped terms of both u and T for y >= y_min.
    """
    K = lacunary_terms(y_min)
    F = lacunary_harmonic(np.ones(K))
    w = 2.0 ** np.arange(K, K + 64)
    F.tail_bound = float(np.sum((1.0 + w * y_min) * np.exp(-w * y_min)))
    F.params["y_min"] = y_min
    return F


# ----------------------------------------------------------------------------
# operations

def transform_T(F, x, y):
    """T(x,y) = u - y du/dy - int_y^1 h lap u(x,h) dh."""
    x, y = F._prep(x, y)
    if np.any(y > 1):
        raise DomainError("T is defined for 0 < y <= 1")
    return F.u(x, y) - y * F.grad(x, y)[..., -1] - F.vertical_integral(x, y)


def lil_numerator(F, x, y):
    """u(x,y) - int_y^1 t lap u(x,t) dt (signed)."""
    return F.u(x, y) - F.vertical_integral(x, y)


def lil_ratio_field(F, psi, x, y):
    return abs(float(lil_numerator(F, x, y))) / lil_denominator(psi, y)


def corrected_numerator(eps, y):
    """int_y^1 eps(t)/t dt, the bound on the Laplacian correction term."""
    return eps.log_integral(y)


@dataclass(frozen=True)
class BlockRegion:
    lower: tuple
    side: float
    s: float
    t: float

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in np.atleast_1d(self.lower)))
        if not (0 < self.side <= 1):
            raise DomainError("cube side must lie in (0, 1]")
        if not (0 < self.s <= self.t <= self.side):
            raise DomainError("need 0 < s <= t <= side")

    @property
    def dim(self):
        return len(self.lower)


def _log_nodes(a, b, n):
    # nodes and weights for int_a^b g(y) dy after y = exp(sigma)
    x, w = quadrature.gauss_legendre(n)
    la, lb = math.log(a), math.log(b)
    sig = la + 0.5 * (lb - la) * (x + 1)
    yy = np.exp(sig)
    return yy, 0.5 * (lb - la) * w * yy


def block_terms(F, R, n):
    """Cube-normalized terms of Green's identity on the block Q x (s, t).

    Returns ``(horizontal_t, horizontal_s, volume, flux)`` where
    horizontal = avg_Q (u - y u_y), volume = |Q|^-1 int int y lap u and
    flux = |Q|^-1 sum_j int_{L_j} y du/dn.
    """
    d, l = R.dim, R.side
    lows = np.asarray(R.lower)[None]
    pts, wts = quadrature.cube_nodes(lows, l, n, d)
    pts = pts[0]

    def horizontal(y):
        yy = np.full(len(pts), y)
        return float(wts @ (F.u(pts, yy) - y * F.grad(pts, yy)[:, -1]))

    h_t, h_s = horizontal(R.t), horizontal(R.s)
    yv, wv = _log_nodes(R.s, R.t, n) if R.t > R.s else (np.array([R.s]), np.zeros(1))
    vol = 0.0
    if not F.harmonic:
        P = pts[:, None, :]
        vals = F.lap(P, yv[None, :]) * yv[None, :]
        vol = float(wts @ (vals @ wv))
    flux = 0.0
    if d == 1:
        faces = [(np.array([[lows[0, 0]]]), np.ones(1), 0, -1.0),
                 (np.array([[lows[0, 0] + l]]), np.ones(1), 0, 1.0)]
    else:
        fx, fw = quadrature.cube_nodes(np.zeros((1, 1)), l, n, 1)
        fx = fx[0, :, 0]
        faces = []
        for j in range(2):
            other = lows[0, 1 - j] + fx
            for side_val, sign in ((lows[0, j], -1.0), (lows[0, j] + l, 1.0)):
                p = np.empty((len(fx), 2))
                p[:, j] = side_val
                p[:, 1 - j] = other
                faces.append((p, fw, j, sign))
    for p, fw_, j, sign in faces:
        g = F.grad(p[:, None, :], yv[None, :])[..., j]                    # (m, n)
        flux += sign * float(fw_ @ ((g * yv[None, :]) @ wv))
    flux /= l  # face area l^(d-1) over |Q| = l^d (face weights are averages)
    return h_t, h_s, vol, flux


def _refined_block_terms(F, R, n_quad=64, rtol=1e-8, n_max=None):
    n_max = n_max or (2048 if R.dim == 1 else 256)
    n = n_quad
    prev = np.array(block_terms(F, R, n))
    while True:
        n *= 2
        cur = np.array(block_terms(F, R, n))
        scale = max(1.0, float(np.max(np.abs(cur))))
        err = float(np.max(np.abs(cur - prev)))
        if err <= rtol * scale or n >= n_max:
            return cur, err
        prev = cur


def green_identity_residual(F, R, n_quad=64):
    """|avg T(.,t) - avg T(.,s) - |Q|^-1 sum_j int_{L_j} y du/dn| on the block R."""
    (h_t, h_s, vol, flux), _ = _refined_block_terms(F, R, n_quad)
    return abs(h_t - h_s + vol - flux)


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        return bool(self.lhs <= self.rhs)


def vertical_variation_bound_check(F, psi, R, n_quad=64):
    """|avg_Q (T(.,t) - T(.,s))| <= (2d/l) int_s^t psi."""
    (h_t, h_s, vol, _), err = _refined_block_terms(F, R, n_quad)
    lhs = abs(h_t - h_s + vol)
    rhs = 2 * R.dim / R.side * psi.integral(R.s, R.t)
    return BoundCheck(float(lhs), float(rhs))


def horizontal_oscillation_check(F, psi, eps, x, z, y):
    """|T(z,y) - T(x,y)| <= 2(|z-x|/y + 1) psi(y).

    ``eps`` is carried for the membership precondition (eps <= psi), which
    the bound itself does not use.
    """
    x = as_points(x, F.dim)
    z = as_points(z, F.dim)
    diff = float(np.abs(transform_T(F, z, y) - transform_T(F, x, y)))
    dist = float(np.linalg.norm(z - x))
    return BoundCheck(diff, 2 * (dist / y + 1) * psi(y))


# -- membership --------------------------------------------------------------

@dataclass(frozen=True)
class MembershipGrid:
    lo: float = -1.0
    hi: float = 1.0
    nx: int = 33
    y_min: float = 1e-6
    ny: int = 48

    def points(self, d):
        xs = np.linspace(self.lo, self.hi, self.nx)
        grids = np.meshgrid(*([xs] * d), indexing="ij")
        X = np.stack([g.ravel() for g in grids], axis=-1)
        Y = np.geomspace(self.y_min, 1.0, self.ny)
        return X, Y


@dataclass
class MembershipReport:
    psi_sup: float
    eps_sup: float
    psi_worst: tuple
    eps_worst: tuple

    @property
    def belongs(self):
        return self.psi_sup <= 1 + 1e-6 and self.eps_sup <= 1 + 1e-6


def membership_check(F, psi, eps, grid=None):
    """Sampled sups of y|grad u|/psi(y) and y^3|grad lap u|/eps(y)."""
    grid = grid or MembershipGrid()
    X, Y = grid.points(F.dim)
    P = np.broadcast_to(X[:, None, :], (len(X), len(Y), F.dim))
    YY = np.broadcast_to(Y[None, :], (len(X), len(Y)))
    r1 = YY * np.linalg.norm(F.grad(P, YY), axis=-1) / psi(Y)[None, :]
    r2 = YY**3 * np.linalg.norm(F.lap_grad(P, YY), axis=-1) / eps(Y)[None, :]
    i1 = np.unravel_index(np.argmax(r1), r1.shape)
    i2 = np.unravel_index(np.argmax(r2), r2.shape)
    return MembershipReport(float(r1[i1]), float(r2[i2]),
                            (tuple(X[i1[0]]), float(Y[i1[1]])),
                            (tuple(X[i2[0]]), float(Y[i2[1]])))


# -- cube averages and T_Q ---------------------------------------------------

def cube_averages(F, func, lows, side, y, n0=64, rtol=1e-8, n_max=None):
    """Averages of ``func(points, heights)`` over cubes at a common height.

    Tensor Gauss-Legendre, doubled until successive results agree to
    ``rtol`` (relative, floor 1).  Returns ``(averages, error_estimate)``.
    """
    d = F.dim
    lows = np.asarray(lows, float).reshape(-1, d)
    n_max = n_max or (8192 if d == 1 else 256)

    def avg(n):
        out = np.empty(len(lows))
        pts_per = n**d
        chunk = max(1, 2**20 // pts_per)
        for i in range(0, len(lows), chunk):
            P, W = quadrature.cube_nodes(lows[i:i + chunk], side, n, d)
            out[i:i + chunk] = func(P, np.full(P.shape[:-1], y)) @ W
        return out

    n = n0
    prev = avg(n)
    while True:
        n *= 2
        cur = avg(n)
        err = np.abs(cur - prev)
        if np.all(err <= rtol * np.maximum(1.0, np.abs(cur))) or n >= n_max:
            return cur, err
        prev = cur


def t_cube_averages(F, lows, side, y):
    if F.t_average is not None:
        return np.asarray(F.t_average(lows, side, y), float), np.zeros(len(np.atleast_2d(lows)))
    return cube_averages(F, lambda P, Y: transform_T(F, P, Y), lows, side, y)


@dataclass
class LimitAverage:
    values: np.ndarray
    tail_bound: float
    quad_error: np.ndarray
    height: float


def t_limit_average(F, psi, lows, side, k0=10):
    """T_Q approximated by the cube average at y* = side * 2^-k0.

    ``tail_bound = (2d/side) int_0^{y*} psi`` bounds |T_Q - average|.
    """
    y_star = side * 2.0**-k0
    vals, err = t_cube_averages(F, lows, side, y_star)
    tail = 2 * F.dim / side * psi.integral_from_zero(y_star)
    return LimitAverage(vals, tail, err, y_star)


def horivert_check(F, psi, side, n_cubes=32, seed=0, k0=10, box=4.0):
    """Fit C in |T_Q - T(x,y)| <= C psi(l) (x in Q, l/2 <= y <= l) on random
    cubes, then validate on a disjoint set drawn from an independent stream."""
    from .rng import stream

    def ratios(rng):
        lows = rng.uniform(-box, box, size=(n_cubes, F.dim))
        TQ = t_limit_average(F, psi, lows, side, k0).values
        x = lows + side * rng.uniform(size=lows.shape)
        y = side * rng.uniform(0.5, 1.0, size=n_cubes)
        return np.abs(TQ - transform_T(F, x, y)) / psi(min(side, 1.0))

    return fit_and_validate(ratios(stream(seed, 1)), ratios(stream(seed, 2)))


def from_spec(spec):
    """Construct a built-in field from a config record."""
    name = spec["name"]
    d = spec.get("d", 1)
    if name == "vertical_log":
        return vertical_log(d)
    if name == "vertical_log_power":
        return vertical_log_power(spec["alpha"], spec.get("shift", 1.0), d)
    if name == "harmonic_linear":
        return harmonic_linear(d)
    if name == "harmonic_height":
        return harmonic_height(d)
    if name == "lacunary_harmonic":
        if "coefficients" in spec:
            return lacunary_harmonic(spec["coefficients"])
        return unit_lacunary(spec["y_min"])
    raise DomainError(f"unknown field {name!r}")
