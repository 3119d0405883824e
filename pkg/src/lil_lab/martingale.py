"""Dyadic cubes of [0,1)^d, dyadic martingales and quadratic variation.

Martingale values for generation n are stored as an array of shape
``(2**n,) * d`` indexed by the zero-based cube index vector, i.e. row-major
flat storage per generation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from itertools import product

import numpy as np

from . import rng
from .calibration import fit_and_validate
from .errors import ConfigError, DomainError, RegimeError
from .field import t_limit_average, lil_numerator

E_E = math.exp(math.e)
RESOLUTION_CAP = 24


@dataclass(frozen=True)
class DyadicCube:
    """Cube prod[(k_j - 1) 2^-n, k_j 2^-n) with one-based index k."""

    n: int
    index: tuple

    def __post_init__(self):
        idx = tuple(int(k) for k in self.index)
        if self.n < 0 or any(not 1 <= k <= 2**self.n for k in idx):
            raise DomainError("cube index out of range")
        object.__setattr__(self, "index", idx)

    @property
    def d(self):
        return len(self.index)

    @property
    def side(self):
        return 2.0**-self.n

    @property
    def lower(self):
        return tuple((k - 1) * self.side for k in self.index)

    def children(self):
        """Children ordered by j - 1 = sum_i b_i 2^(i-1)."""
        out = []
        for j in range(2**self.d):
            bits = [(j >> i) & 1 for i in range(self.d)]
            out.append(DyadicCube(self.n + 1, tuple(2 * (k - 1) + b + 1 for k, b in zip(self.index, bits))))
        return out

    def contains(self, x):
        x = np.atleast_1d(np.asarray(x, float))
        lo = np.asarray(self.lower)
        return bool(np.all((lo <= x) & (x < lo + self.side)))


def _check_unit(x, d=None):
    x = np.atleast_1d(np.asarray(x, float))
    if d is not None and x.shape[-1] != d:
        raise DomainError(f"expected a point of dimension {d}")
    if np.any((x < 0) | (x >= 1)):
        raise DomainError("point must lie in [0,1)^d")
    return x


def tower(x, n):
    """Q_0 > Q_1 > ... > Q_n, the dyadic cubes containing x."""
    x = _check_unit(x)
    return [DyadicCube(k, tuple(int(v) + 1 for v in np.floor(x * 2**k))) for k in range(n + 1)]


def _index(x, n):
    # zero-based index vectors of the generation-n cubes containing points x (..., d)
    return np.minimum(np.floor(x * 2**n).astype(np.int64), 2**n - 1)


@dataclass
class MartingalePath:
    x: tuple
    values: np.ndarray
    qv: np.ndarray                     # qv[n] = <T>_n, qv[0] = 0

    @property
    def increments(self):
        return np.diff(self.values)


@dataclass
class DyadicMartingale:
    d: int
    levels: list
    source: str = "explicit"
    tails: np.ndarray = None           # per-level truncation bound (field-induced)
    quad_errors: list = None           # per-level per-cube quadrature error
    meta: dict = dc_field(default_factory=dict)

    @property
    def depth(self):
        return len(self.levels) - 1

    def value(self, cube):
        if cube.n > self.depth:
            raise DomainError("cube deeper than the martingale")
        return float(self.levels[cube.n][tuple(k - 1 for k in cube.index)])

    def path_values(self, x, n=None):
        """T_0(x), ..., T_n(x) for points x of shape (..., d)."""
        n = self.depth if n is None else n
        x = np.asarray(x, float).reshape(-1, self.d) if self.d > 1 else np.asarray(x, float).reshape(-1, 1)
        return np.stack([self.levels[k][tuple(_index(x, k).T)] for k in range(n + 1)], axis=-1)

    def child_values(self, n, arrays=None):
        """Generation-(n+1) values grouped by parent: shape (2**n,)*d + (2**d,)."""
        a = (arrays or self.levels)[n + 1]
        m = 2**n
        a = a.reshape(sum(((m, 2) for _ in range(self.d)), ()))
        # axes (k1, b1, k2, b2, ...) -> (k1, k2, ..., b_d, ..., b_1) so that j-1 = sum b_i 2^(i-1)
        order = list(range(0, 2 * self.d, 2)) + list(range(2 * self.d - 1, 0, -2))
        return a.transpose(order).reshape((m,) * self.d + (2**self.d,))

    def mean_defects(self):
        """|T_n(Q) - mean of children| for every internal cube, per generation."""
        return [np.abs(self.levels[n] - self.child_values(n).mean(axis=-1)) for n in range(self.depth)]

    def mean_tolerances(self):
        """Certified tolerance for each internal cube's mean defect.

        Zero for exact martingales; for field-induced ones the truncation tails
        of the parent and children plus ten times their quadrature errors.
        """
        if self.tails is None:
            return [np.zeros(self.levels[n].shape) for n in range(self.depth)]
        out = []
        for n in range(self.depth):
            qe_child = self._child_errors(n)
            out.append(self.tails[n] + self.tails[n + 1] + 10 * (self.quad_errors[n] + qe_child) + 1e-12)
        return out

    def _child_errors(self, n):
        return self.child_values(n, self.quad_errors).max(axis=-1)

    def quadratic_variation(self, x, n=None):
        """<T>_n(x) = sum_k 2^-d sum_j (T_k(Q_k^j) - T_{k-1}(x))^2, for every k <= n."""
        n = self.depth if n is None else n
        x = np.asarray(x, float).reshape(-1, self.d)
        qv = np.zeros((len(x), n + 1))
        for k in range(1, n + 1):
            idx = tuple(_index(x, k - 1).T)
            kids = self.child_values(k - 1)[idx]
            parent = self.levels[k - 1][idx]
            qv[:, k] = qv[:, k - 1] + np.mean((kids - parent[:, None]) ** 2, axis=-1)
        return qv

    def path(self, x):
        x = _check_unit(x, self.d)
        return MartingalePath(tuple(x), self.path_values(x)[0], self.quadratic_variation(x)[0])


def quadratic_variation(M, x, n):
    if n > M.depth:
        raise DomainError("n exceeds the martingale depth")
    _check_unit(x, M.d)
    return float(M.quadratic_variation(x, n)[0, n])


def lil_ratio(value, qv):
    """|T| / sqrt(V log log V); raises RegimeError unless V > e^e."""
    qv = np.asarray(qv, float)
    if np.any(~(qv > E_E)):
        raise RegimeError("quadratic variation too small for LIL regime (<= e^e)")
    return np.abs(value) / np.sqrt(qv * np.log(np.log(qv)))


def lil_ratio_martingale(M, x, n):
    p = M.path(x)
    return float(lil_ratio(p.values[n], p.qv[n]))


# -- random martingales ------------------------------------------------------

def sign_vectors(d):
    """All zero-sum vectors in {-1, +1}^(2^d), in lexicographic order."""
    m = 2**d
    return np.array([v for v in product((-1, 1), repeat=m) if sum(v) == 0], dtype=float)


def _resolve_scales(scales, N):
    if callable(scales):
        s = np.array([scales(k) for k in range(1, N + 1)], float)
    else:
        s = np.broadcast_to(np.asarray(scales, float), (N,)).copy()
    if np.any(~(s > 0)):
        raise DomainError("scales must be positive")
    return s


def _check_resolution(d, N):
    if d not in (1, 2):
        raise DomainError("only d = 1 and d = 2 are supported")
    if N * d > RESOLUTION_CAP:
        raise ConfigError(f"resolution cap exceeded: N*d = {N * d} > {RESOLUTION_CAP}")


def _signs_for(keys, signs):
    choice = (rng.combine(keys, 0) % np.uint64(len(signs))).astype(np.int64)
    return signs[choice]


def build_random(d, N, scales, seed):
    """Random signed martingale: T_0 = 0 and each child gets parent + s_k sigma_j.

    Cube keys are derived recursively from the parent key and the child
    number, so values depend only on (seed, cube) and agree with
    :func:`simulate_paths` along any tower.
    """
    _check_resolution(d, N)
    s = _resolve_scales(scales, N)
    signs = sign_vectors(d)
    keys = np.full((1,) * d, rng.root_key(seed), dtype=np.uint64)
    levels = [np.zeros((1,) * d)]
    for k in range(1, N + 1):
        m = 2 ** (k - 1)
        sig = _signs_for(keys, signs)                        # parent shape + (2^d,)
        new_vals = np.empty((2 * m,) * d)
        new_keys = np.empty((2 * m,) * d, dtype=np.uint64)
        for j in range(2**d):
            bits = [(j >> i) & 1 for i in range(d)]
            sl = tuple(slice(b, None, 2) for b in bits)
            new_vals[sl] = levels[-1] + s[k - 1] * sig[..., j]
            new_keys[sl] = rng.combine(keys, j + 1)
        levels.append(new_vals)
        keys = new_keys
    return DyadicMartingale(d, levels, source="random", meta={"seed": seed, "scales": s})


@dataclass
class PathEnsemble:
    values: np.ndarray        # (P, n+1)
    qv: np.ndarray            # (P, n+1)
    digits: np.ndarray        # (P, n) child numbers j - 1


def digits_of(x, n):
    """Child numbers along the tower of x (j - 1 = sum_i b_i 2^(i-1))."""
    x = np.atleast_2d(np.asarray(x, float))
    out = np.zeros((len(x), n), dtype=np.int64)
    for k in range(1, n + 1):
        bits = (np.floor(x * 2**k).astype(np.int64) & 1)
        out[:, k - 1] = (bits << np.arange(x.shape[1])).sum(axis=1)
    return out


def simulate_paths(d, n, scales, seed, digits):
    """Follow random-signed-martingale towers given per-path child digits.

    Works at any depth since only the visited cubes are generated.
    """
    digits = np.asarray(digits, dtype=np.int64)
    s = _resolve_scales(scales, n)
    signs = sign_vectors(d)
    P = len(digits)
    keys = np.full(P, rng.root_key(seed), dtype=np.uint64)
    vals = np.zeros((P, n + 1))
    qv = np.zeros((P, n + 1))
    sq = np.mean(signs**2, axis=1)
    for k in range(1, n + 1):
        choice = (rng.combine(keys, 0) % np.uint64(len(signs))).astype(np.int64)
        j = digits[:, k - 1]
        vals[:, k] = vals[:, k - 1] + s[k - 1] * signs[choice, j]
        qv[:, k] = qv[:, k - 1] + s[k - 1] ** 2 * sq[choice]
        keys = rng.combine(keys, (j + 1).astype(np.uint64))
    return PathEnsemble(vals, qv, digits)


def random_digits(d, n, n_paths, seed):
    """Uniform tower digits for n_paths deep paths (an independent stream)."""
    return rng.stream(seed, 0x7061746873).integers(0, 2**d, size=(n_paths, n))


@dataclass
class LILSummary:
    terminal_ratio: np.ndarray
    running_max: np.ndarray
    frac_exceeding: float
    median_terminal: float
    threshold: float


def lil_statistics(paths, n_lo, n_hi, threshold=3.0):
    """Running-max LIL ratios on n in [n_lo, n_hi] for a path ensemble."""
    r = lil_ratio(paths.values[:, n_lo:n_hi + 1], paths.qv[:, n_lo:n_hi + 1])
    run = r.max(axis=1)
    term = r[:, -1]
    return LILSummary(term, run, float(np.mean(run > threshold)), float(np.median(term)), threshold)


# -- field-induced martingales ------------------------------------------------

def dyadic_lows(d, n):
    m = 2**n
    grids = np.meshgrid(*([np.arange(m) / m] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def build_from_field(F, psi, N, k0=10):
    """T_n(Q) = average of T over Q at height l(Q) 2^-k0, for every n <= N.

    ``tails[n]`` holds the certified truncation bound of generation n and
    ``quad_errors[n]`` the per-cube quadrature error estimates.
    """
    d = F.dim
    _check_resolution(d, N)
    levels, tails, qerr = [], [], []
    for n in range(N + 1):
        lim = t_limit_average(F, psi, dyadic_lows(d, n), 2.0**-n, k0)
        shape = (2**n,) * d
        levels.append(lim.values.reshape(shape))
        qerr.append(np.asarray(lim.quad_error, float).reshape(shape))
        tails.append(lim.tail_bound)
    return DyadicMartingale(d, levels, source="field", tails=np.array(tails), quad_errors=qerr,
                            meta={"field": F.name, "k0": k0})


@dataclass
class IncrementReport:
    increments: object       # FittedBound for |X_k| <= C psi(2^-k)
    quadratic: object        # FittedBound for <T>_n <= C Psi(2^-n)

    @property
    def passed(self):
        return self.increments.passed and self.quadratic.passed


def _sample_points(d, n_points, seed, label):
    return rng.stream(seed, label).uniform(size=(n_points, d))


def increment_bound_check(M, psi, n_points=256, seed=0):
    """Fit C on calibration points, validate on fresh points, for both the
    increment bound and the quadratic-variation bound."""
    N = M.depth
    k = np.arange(1, N + 1)
    psi_k = psi(2.0**-k)
    Psi_k = np.array([psi.square_function(2.0**-kk) for kk in k])

    def ratios(label):
        x = _sample_points(M.d, n_points, seed, label)
        vals = M.path_values(x)
        inc = np.abs(np.diff(vals, axis=1)) / psi_k
        qv = M.quadratic_variation(x)[:, 1:] / Psi_k
        return inc.ravel(), qv.ravel()

    ci, cq = ratios(1)
    vi, vq = ratios(2)
    return IncrementReport(fit_and_validate(ci, vi), fit_and_validate(cq, vq))


def closeness_check(M, F, psi, n_points=128, n_min=1, seed=0):
    """|u(x,y) - int_y^1 t lap u - T_n(x)| <= C psi(2^-n), 2^-(n+1) <= y <= 2^-n."""
    N = M.depth

    def ratios(label):
        g = rng.stream(seed, label)
        x = g.uniform(size=(n_points, M.d))
        vals = M.path_values(x)
        out = []
        for n in range(n_min, N + 1):
            y = 2.0**-n * g.uniform(0.5, 1.0, size=n_points)
            num = lil_numerator(F, x, y)
            out.append(np.abs(num - vals[:, n]) / psi(2.0**-n))
        return np.concatenate(out)

    return fit_and_validate(ratios(3), ratios(4))
