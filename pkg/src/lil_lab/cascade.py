"""Multiplicative cascades on dyadic cells and their Poisson extensions.

The measure lives on the unit cubes ``[k, k+1)`` with integer corners in
``[-W, W)^d``; every unit cube has mass one and each dyadic child receives
the fraction ``p_j`` of its parent.  Its harmonic extension is evaluated
from point masses at the centers of the generation-N cells.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature, rng
from .errors import ConfigError, DomainError, RegimeError, ResolutionError
from .field import ScalarField

C_D = {1: 1.0 / math.pi, 2: 1.0 / (2.0 * math.pi)}
CELL_CAP = 2**24
CHUNK = 2**14          # cells per partial sum; fixed so sums never depend on batch shape


def _child_slices(d):
    # child number j - 1 = sum_i b_i 2^(i-1)  ->  slice selecting those children
    return [tuple(slice((j >> i) & 1, None, 2) for i in range(d)) for j in range(2**d)]


class CascadeMeasure:
    """Deterministic multiplicative cascade, optionally with seeded child order."""

    def __init__(self, weights, depth, half_width=8, d=None, permutation_seed=None):
        p = np.asarray(weights, dtype=float)
        d = d or int(round(math.log2(len(p))))
        if d not in (1, 2) or len(p) != 2**d:
            raise DomainError("need 2 weights (d=1) or 4 weights (d=2)")
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("weights must be positive and sum to 1")
        if depth < 0 or half_width < 1:
            raise DomainError("depth must be >= 0 and half_width >= 1")
        if (2 * half_width) ** d * 2 ** (depth * d) > CELL_CAP:
            raise ConfigError("cell cap exceeded: (2W)^d 2^(Nd) > 2^24")
        self.p, self.d, self.depth, self.half_width = p, d, depth, half_width
        self.permutation_seed = permutation_seed
        self._levels = self._build()

    @property
    def units(self):
        """Integer lower corners of the unit cubes, shape (U, d), row-major."""
        r = np.arange(-self.half_width, self.half_width)
        g = np.meshgrid(*([r] * self.d), indexing="ij")
        return np.stack([a.ravel() for a in g], axis=-1)

    @property
    def n_units(self):
        return (2 * self.half_width) ** self.d

    def _build(self):
        d, U = self.d, self.n_units
        levels = [np.ones((U,) + (1,) * d)]
        slices = _child_slices(d)
        keys = None
        if self.permutation_seed is not None:
            base = rng.root_key(self.permutation_seed)
            keys = rng.combine(base, np.arange(U, dtype=np.uint64)).reshape((U,) + (1,) * d)
        for n in range(1, self.depth + 1):
            parent = levels[-1]
            child = np.empty((U,) + (2**n,) * d)
            if keys is None:
                w = np.broadcast_to(self.p, parent.shape + (2**d,))
            else:
                ranks = np.stack([rng.uniform01(rng.combine(keys, 1000 + j)) for j in range(2**d)], axis=-1)
                w = self.p[np.argsort(ranks, axis=-1)]
                new_keys = np.empty(child.shape, dtype=np.uint64)
            for j, sl in enumerate(slices):
                full = (slice(None),) + sl
                child[full] = parent * w[..., j]
                if keys is not None:
                    new_keys[full] = rng.combine(keys, j + 1)
            if keys is not None:
                keys = new_keys
            levels.append(child)
        return levels

    def masses(self, n):
        """Generation-n cell masses, shape (U,) + (2**n,)*d."""
        if not 0 <= n <= self.depth:
            raise DomainError("generation outside [0, depth]")
        return self._levels[n]

    def cells(self, n=None):
        """Flat ``(centers (C, d), masses (C,), side)`` at generation n (default N)."""
        n = self.depth if n is None else n
        m = self.masses(n)
        side = 2.0**-n
        local = (np.arange(2**n) + 0.5) * side
        g = np.meshgrid(*([local] * self.d), indexing="ij")
        local = np.stack([a.ravel() for a in g], axis=-1)
        centers = (self.units[:, None, :] + local[None]).reshape(-1, self.d)
        return centers, m.reshape(-1), side

    def measure_of(self, cube, unit=None):
        """Mass of a dyadic cube (a ``DyadicCube``) inside the unit cube at ``unit``."""
        unit = np.zeros(self.d, int) if unit is None else np.atleast_1d(np.asarray(unit, int))
        if np.any(unit < -self.half_width) or np.any(unit >= self.half_width):
            raise DomainError("cube outside the support")
        if cube.n > self.depth:
            raise DomainError("cube deeper than the cascade")
        u = int(np.ravel_multi_index(tuple(unit + self.half_width), (2 * self.half_width,) * self.d))
        return float(self._levels[cube.n][(u,) + tuple(k - 1 for k in cube.index)])

    def total_mass(self, n):
        return float(self.masses(n).sum())


def lebesgue(depth, half_width=8, d=1):
    return CascadeMeasure(np.full(2**d, 2.0**-d), depth, half_width, d)


class PointMasses:
    """A finite sum of point masses, mainly for kernel sanity checks."""

    def __init__(self, centers, masses):
        self.centers = np.atleast_2d(np.asarray(centers, float))
        self.m = np.atleast_1d(np.asarray(masses, float))
        self.d = self.centers.shape[1]
        self.depth = None

    def cells(self, n=None):
        return self.centers, self.m, 0.0


# -- Poisson kernel sums -------------------------------------------------------

def _kernel_sums(x, y, centers, masses, order):
    """Sums of mass * (K, grad K, hess K) for probes x (M, d), heights y (M,).

    Coordinates are (spatial..., vertical).  ``order`` is 0, 1 or 2.  Cells
    are reduced in fixed chunks of ``CHUNK`` (pairwise within a chunk, then
    in chunk order), so every probe's value is independent of how probes are
    batched or split across threads.
    """
    M, d = x.shape
    # probe blocks of about 2^18 probe-cell pairs; blocking never changes a probe's value
    B = max(1, 2**18 // max(1, min(CHUNK, len(masses))))
    v = np.zeros(M)
    g = np.zeros((M, d + 1)) if order >= 1 else None
    H = np.zeros((M, d + 1, d + 1)) if order >= 2 else None
    for lo in range(0, M, B):
        sl = slice(lo, lo + B)
        parts = _kernel_block(x[sl], y[sl], centers, masses, order)
        v[sl] = parts[0]
        if order >= 1:
            g[sl] = parts[1]
        if order >= 2:
            H[sl] = parts[2]
    return v, g, H


def _kernel_block(x, y, centers, masses, order):
    M, d = x.shape
    m = d + 1
    c = C_D[d]
    yy = y[:, None]
    y2 = yy * yy
    S0 = np.zeros(M)
    S1 = np.zeros(M) if order >= 1 else None
    Sx = np.zeros((M, d)) if order >= 1 else None
    H = np.zeros((M, m, m)) if order >= 2 else None
    for start in range(0, len(masses), CHUNK):
        ctr = centers[start:start + CHUNK]
        w = masses[start:start + CHUNK]
        dx = [x[:, i, None] - ctr[None, :, i] for i in range(d)]
        q = dx[0] * dx[0]
        for i in range(1, d):
            q += dx[i] * dx[i]
        q += y2
        np.reciprocal(q, out=q)                              # 1 / rho^2
        base = q * w if d == 1 else q * np.sqrt(q) * w       # w rho^-m
        S0 += base.sum(axis=1)
        if order >= 1:
            bq = base * q                                    # w rho^-m-2
            S1 += bq.sum(axis=1)
            for i in range(d):
                Sx[:, i] += (bq * dx[i]).sum(axis=1)
        if order >= 2:
            z = dx + [np.broadcast_to(yy, dx[0].shape)]
            t2 = m * bq
            t3 = m * (m + 2) * yy * bq * q
            for a in range(m):
                for b in range(a, m):
                    h = t3 * z[a] * z[b]
                    if a == b:
                        h -= t2 * yy
                    if a == d:
                        h -= t2 * z[b]
                    if b == d:
                        h -= t2 * z[a]
                    s = h.sum(axis=1)
                    H[:, a, b] += c * s
                    if a != b:
                        H[:, b, a] += c * s
    v = c * y * S0
    out = [v]
    if order >= 1:
        g = np.empty((M, m))
        g[:, :d] = -m * c * y[:, None] * Sx
        g[:, d] = c * (S0 - m * y * y * S1)
        out.append(g)
    if order >= 2:
        out.append(H)
    return out


@dataclass
class PoissonValue:
    v: np.ndarray
    grad: np.ndarray
    truncation_bound: np.ndarray
    discretization_bound: np.ndarray


class PoissonExtension:
    """v = P[mu] from generation-N cell-center point masses.

    ``truncation_bound`` bounds the contribution of the unit cubes outside the
    support; ``discretization_bound`` bounds the midpoint error of replacing
    each cell's uniform mass by a point mass.
    """

    def __init__(self, measure, generation=None):
        self.measure = measure
        self.d = measure.d
        self.generation = measure.depth if generation is None else generation
        self._centers, self._masses, self.cell_side = measure.cells(self.generation)
        self.y_floor = 4.0 * 2.0**-self.generation if self.generation is not None else 0.0

    def _prep(self, x, y):
        x = np.asarray(x, float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        y = np.asarray(y, float)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape)
        x = np.broadcast_to(x, shape + (self.d,)).reshape(-1, self.d)
        y = np.broadcast_to(y, shape).reshape(-1)
        if np.any(~(y > 0)):
            raise DomainError("heights must be positive")
        if np.any(y < self.y_floor * (1 - 1e-12)):
            raise ResolutionError(f"height below resolution floor {self.y_floor:.3g}")
        return x, y, shape

    def sums(self, x, y, order=1):
        x, y, shape = self._prep(x, y)
        v, g, H = _kernel_sums(x, y, self._centers, self._masses, order)
        out = [v.reshape(shape)]
        if order >= 1:
            out.append(g.reshape(shape + (self.d + 1,)))
        if order >= 2:
            out.append(H.reshape(shape + (self.d + 1, self.d + 1)))
        return out

    def __call__(self, x, y):
        return self.sums(x, y, 0)[0]

    def grad(self, x, y):
        return self.sums(x, y, 1)[1]

    def truncation_bound(self, x, y):
        """Kernel mass of all unit cubes outside [-W, W)^d, summed shell by shell."""
        if not isinstance(self.measure, CascadeMeasure):
            return np.zeros(np.shape(y))
        x, y, shape = self._prep(x, y)
        d, W, c = self.d, self.measure.half_width, C_D[self.d]
        a = np.max(np.abs(x), axis=1)                                  # sup-norm of x
        k = np.arange(W, W + 20000, dtype=float)
        count = (2 * k + 2) ** d - (2 * k) ** d
        dist = np.maximum(k[None] - a[:, None], 0.0)
        terms = count * c * y[:, None] / (dist**2 + y[:, None] ** 2) ** ((d + 1) / 2)
        K = k[-1] + 1
        tail = 2**d * c * y * ((K + 1) / (K - a)) ** (d - 1) / (K - a)
        return (terms.sum(axis=1) + tail).reshape(shape)

    def discretization_bound(self, x, y):
        if self.cell_side == 0:
            return np.zeros(np.shape(y))
        x, y, shape = self._prep(x, y)
        d, h, c = self.d, self.cell_side, C_D[self.d]
        a = (d + 1) / 2
        out = np.zeros(len(y))
        for start in range(0, len(self._masses), CHUNK):
            ctr = self._centers[start:start + CHUNK]
            w = self._masses[start:start + CHUNK]
            r = np.sqrt(((x[:, None, :] - ctr[None]) ** 2).sum(-1))
            r = np.maximum(r - 0.5 * h * math.sqrt(d), 0.0)
            s = r**2 + y[:, None] ** 2
            out += np.sum(w * c * y[:, None] * s ** (-a - 1), axis=1)
        return (out * h**2 * d / 24 * 2 * a * (2 * a + 3)).reshape(shape)

    def evaluate(self, x, y):
        v, g = self.sums(x, y, 1)
        return PoissonValue(v, g, self.truncation_bound(x, y), self.discretization_bound(x, y))


class AnalyticHarmonic:
    """A positive harmonic function given in closed form, same interface."""

    def __init__(self, value, gradient, d=1, name="analytic"):
        self._v, self._g, self.d, self.name = value, gradient, d, name
        self.y_floor = 0.0

    def _prep(self, x, y):
        x = np.asarray(x, float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        y = np.asarray(y, float)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape)
        return np.broadcast_to(x, shape + (self.d,)), np.broadcast_to(y, shape), shape

    def sums(self, x, y, order=1):
        x, y, _ = self._prep(x, y)
        out = [np.asarray(self._v(x, y), float)]
        if order >= 1:
            out.append(np.asarray(self._g(x, y), float))
        if order >= 2:
            raise NotImplementedError("Hessian not supplied")
        return out

    def __call__(self, x, y):
        return self.sums(x, y, 0)[0]

    def grad(self, x, y):
        return self.sums(x, y, 1)[1]


def height_function(d=1):
    """v(x, y) = y."""

    def grad(x, y):
        g = np.zeros(x.shape[:-1] + (d + 1,))
        g[..., -1] = 1.0
        return g

    return AnalyticHarmonic(lambda x, y: y + 0 * x[..., 0], grad, d, name="height")


# -- derived quantities ----------------------------------------------------------

def poisson_eval(P, x, y):
    return P.evaluate(x, y)


def harnack_ratio(P, x, y):
    """y |grad v| / v."""
    v, g = P.sums(x, y, 1)
    return np.asarray(y) * np.linalg.norm(g, axis=-1) / v


def _a2_integrand(P, X):
    def f(t):
        # t has shape (S, M): one row per sample point
        xs = np.broadcast_to(X[:, None, :], t.shape + (X.shape[1],))
        v, g = P.sums(xs, t, 1)
        return t * np.sum(g * g, axis=-1) / (v * v)
    return f


def a_squared_profile(P, X, heights, rtol=1e-6):
    """A^2(v)(x, y) = int_y^1 t |grad v|^2 / v^2 dt for every sample x and every y.

    ``X`` has shape (S, d) and ``heights`` is a 1-D ladder; the integrals are
    accumulated from the top so nested heights share work.  Returns (S, H).
    """
    X = np.asarray(X, float).reshape(-1, P.d)
    hs = np.asarray(heights, float)
    if np.any(hs <= 0) or np.any(hs > 1):
        raise DomainError("heights must lie in (0, 1]")
    if np.any(hs < P.y_floor * (1 - 1e-12)):
        raise ResolutionError(f"height below resolution floor {P.y_floor:.3g}")
    order = np.argsort(hs)[::-1]
    f = _a2_integrand(P, X)
    out = np.zeros((len(X), len(hs)))
    acc, top = np.zeros(len(X)), 1.0
    for i in order:
        h = hs[i]
        if h < top:
            # lower pieces are judged against the accumulated integral from above
            atol = max(1e-12, rtol * float(acc.min()))
            val, _ = quadrature.integrate_log_batch(f, np.full(len(X), h), top, rtol=rtol, atol=atol, n=4)
            acc = acc + val
            top = h
        out[:, i] = acc
    return out


def a_squared_v(P, x, y):
    return float(a_squared_profile(P, np.atleast_1d(np.asarray(x, float)).reshape(1, -1), [y])[0, 0])


def _triple_log_denominator(L):
    if not L > math.e:
        raise RegimeError("log(1/y) must exceed e for the log log log factor")
    return math.sqrt(L * math.log(math.log(L)))


def log_v_lil_ratio(P, x, y, a2=None):
    """|log v(x,y) + A^2(v)(x,y)| / sqrt(log(1/y) log log log(1/y))."""
    den = _triple_log_denominator(-math.log(y))
    a2 = a_squared_v(P, x, y) if a2 is None else a2
    return abs(math.log(float(P(x, y))) + a2) / den


@dataclass
class LowerBoundReport:
    inf_ratio: float
    ratios: np.ndarray                 # (S, H) A^2 / log(1/y)
    heights: np.ndarray
    oscillation: dict                  # C1 -> empirical C2
    best_c1: float
    best_c2: float
    step_bound_holds: bool             # A^2 >= n_steps log^2 C2 / log C1 at every sample


def cascade_lower_bound_check(P, heights, n_samples, seed=0, c1_choices=(2, 4, 8), per_octave=4,
                              a2=None, X=None):
    """Empirical version of the oscillation / Cauchy-Schwarz lower bound for A^2(v).

    For each C1 the empirical C2 is the smallest (over samples and ladder
    heights y) oscillation ``exp(max_{t in [y, C1 y]} |log v(t) - log v(y)|)``,
    with t on a grid of ``per_octave`` points per octave.  The step bound
    ``A^2 >= floor(log(1/y)/log C1) log^2 C2 / log C1`` is then checked.
    """
    m = P.measure
    if np.allclose(m.p, m.p[0]):
        raise DomainError("precondition violated: all cascade weights are equal")
    hs = np.asarray(heights, float)
    if X is None:
        X = rng.stream(seed, 0x636173).uniform(size=(n_samples, P.d))
    if a2 is None:
        a2 = a_squared_profile(P, X, hs)
    L = -np.log(hs)
    ratios = a2 / L[None]
    top = max(c1_choices)
    steps = np.arange(int(round(per_octave * math.log2(top))) + 1)
    grid = hs[:, None] * 2.0 ** (steps / per_octave)[None]                      # (H, S)
    ts, inv = np.unique(np.round(np.log2(grid) * per_octave).astype(int), return_inverse=True)
    tvals = 2.0 ** (ts / per_octave)
    valid = tvals <= 1.0
    lv_all = np.full((len(X), len(tvals)), np.nan)
    xs = np.broadcast_to(X[:, None, :], (len(X), int(valid.sum()), P.d))
    lv_all[:, valid] = np.log(P(xs, np.broadcast_to(tvals[valid], (len(X), int(valid.sum())))))
    lv = lv_all[:, inv.reshape(grid.shape)]                                     # (S, H, steps)
    osc = {}
    for c1 in c1_choices:
        k = int(round(per_octave * math.log2(c1))) + 1
        swing = np.nanmax(np.abs(lv[..., :k] - lv[..., :1]), axis=-1)
        osc[c1] = float(np.exp(swing.min()))
    best_c1 = max(osc, key=lambda c: math.log(osc[c]) ** 2 / math.log(c))
    c2 = osc[best_c1]
    n_steps = np.floor(L / math.log(best_c1))
    holds = bool(np.all(a2 >= n_steps[None] * math.log(c2) ** 2 / math.log(best_c1) * (1 - 1e-9)))
    return LowerBoundReport(float(ratios.min()), ratios, hs, osc, float(best_c1), c2, holds)


# -- u = log v as a field ------------------------------------------------------------

def poisson_log_field(P, name="poisson_log"):
    """The field u = log v with closed-form derivatives from kernel Hessians.

    Delta u = -|grad v|^2 / v^2 and
    grad Delta u = -2 H grad v / v^2 + 2 |grad v|^2 grad v / v^3.
    """

    def value(x, y):
        return np.log(P(x, y))

    def grad(x, y):
        v, g = P.sums(x, y, 1)
        return g / v[..., None]

    def lap(x, y):
        v, g = P.sums(x, y, 1)
        return -np.sum(g * g, axis=-1) / (v * v)

    def lap_grad(x, y):
        v, g, H = P.sums(x, y, 2)
        Hg = np.einsum("...ab,...b->...a", H, g)
        gg = np.sum(g * g, axis=-1)
        return -2 * Hg / (v * v)[..., None] + 2 * (gg / v**3)[..., None] * g

    return ScalarField(P.d, value, grad, lap, lap_grad, name=name)
