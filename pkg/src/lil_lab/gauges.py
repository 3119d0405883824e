"""Gauge functions on (0, 1], their square functions and sampled diagnostics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, RegimeError

E_E = math.exp(math.e)
QUAD_RTOL = 1e-8


def _check_heights(y):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)) or np.any(y > 1):
        raise DomainError("heights must lie in (0, 1]")
    return y


def _quad(func, a, b, points=None):
    """scipy quad with warnings promoted, returns (value, ok)."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            kw = {"limit": 500, "epsrel": QUAD_RTOL, "epsabs": 0.0}
            if points is not None and len(points) and np.isfinite(b):
                kw["points"] = points
            val, _ = integrate.quad(func, a, b, **kw)
        except integrate.IntegrationWarning:
            return math.inf, False
    return val, math.isfinite(val)


class GaugeFunction:
    """A positive gauge psi on (0, 1].

    Subclasses implement ``_value`` on validated heights; closed forms for
    the derived integrals are provided where they exist.
    """

    def __call__(self, y):
        y = _check_heights(y)
        out = self._value(y)
        return float(out) if out.ndim == 0 else out

    def _value(self, y):
        raise NotImplementedError

    def _value_s(self, s):
        # psi(exp(-s)); overridden where a direct form avoids underflow
        return self._value(np.exp(-np.asarray(s, float)))

    def _breaks(self):
        # heights where the gauge has kinks; quadrature seeds panels there
        return ()

    def scaled(self, factor):
        return Scaled(self, float(factor))

    # -- integrals -----------------------------------------------------
    def square_function(self, y):
        """Psi(y) = int_y^1 psi(t)^2 / t dt."""
        y = float(_check_heights(y))
        if y == 1.0:
            return 0.0
        return self._square_quad(y)

    def _square_quad(self, y):
        L = -math.log(y)
        pts = [-math.log(b) for b in self._breaks() if y < b < 1]
        val, ok = _quad(lambda s: float(self._value_s(s)) ** 2, 0.0, L, pts)
        return val

    def log_integral(self, y):
        """int_y^1 psi(t) / t dt, the global growth bound for B_psi."""
        y = float(_check_heights(y))
        if y == 1.0:
            return 0.0
        pts = [-math.log(b) for b in self._breaks() if y < b < 1]
        val, _ = _quad(lambda s: float(self._value_s(s)), 0.0, -math.log(y), pts)
        return val

    def integral_from_zero(self, y):
        """int_0^y psi(t) dt; ``math.inf`` when the quadrature does not converge."""
        y = float(_check_heights(y))
        L = -math.log(y)

        def g(s):
            p = float(self._value_s(s))
            return math.exp(math.log(p) - s) if p > 0 else 0.0

        pts = [-math.log(b) for b in self._breaks() if b < y]
        head, ok = _quad(g, L, L + 60.0, pts)
        tail, ok2 = _quad(g, L + 60.0, math.inf)
        return head + tail if ok and ok2 else math.inf

    def integral(self, a, b):
        """int_a^b psi(t) dt for 0 < a <= b <= 1."""
        if a == b:
            return 0.0
        return self.integral_from_zero(b) - self.integral_from_zero(a)


@dataclass(frozen=True)
class Constant(GaugeFunction):
    B: float = 1.0

    def __post_init__(self):
        if not self.B > 0:
            raise DomainError("constant gauge must be positive")

    def _value(self, y):
        return np.full(np.shape(y), self.B, dtype=float)

    def square_function(self, y):
        y = float(_check_heights(y))
        return self.B**2 * -math.log(y)

    def log_integral(self, y):
        return self.B * -math.log(float(_check_heights(y)))

    def integral_from_zero(self, y):
        return self.B * float(_check_heights(y))


@dataclass(frozen=True)
class ShiftedLogPower(GaugeFunction):
    """psi(y) = (shift + log(1/y)) ** (alpha - 1)."""

    alpha: float
    shift: float = 1.0

    def __post_init__(self):
        if not self.shift > 0:
            raise DomainError("shift must be positive")

    def _value(self, y):
        return (self.shift - np.log(y)) ** (self.alpha - 1.0)

    def _value_s(self, s):
        return (self.shift + np.asarray(s, float)) ** (self.alpha - 1.0)


@dataclass(frozen=True)
class PowerLaw(GaugeFunction):
    """psi(y) = y ** (-delta)."""

    delta: float

    def _value(self, y):
        return np.power(y, -self.delta)

    def _value_s(self, s):
        return np.exp(self.delta * np.asarray(s, float))

    def square_function(self, y):
        y = float(_check_heights(y))
        if self.delta == 0:
            return -math.log(y)
        return (y ** (-2 * self.delta) - 1.0) / (2 * self.delta)

    def log_integral(self, y):
        y = float(_check_heights(y))
        if self.delta == 0:
            return -math.log(y)
        return (y ** (-self.delta) - 1.0) / self.delta

    def integral_from_zero(self, y):
        y = float(_check_heights(y))
        if self.delta >= 1:
            return math.inf
        return y ** (1 - self.delta) / (1 - self.delta)


@dataclass(frozen=True)
class Tabulated(GaugeFunction):
    """Knots ``(y, value)`` with log psi interpolated linearly in log y.

    Outside the knot range the gauge is extended by constants.
    """

    knots: tuple

    def __post_init__(self):
        ks = tuple((float(a), float(b)) for a, b in self.knots)
        if len(ks) < 2:
            raise DomainError("need at least two knots")
        ys = np.array([k[0] for k in ks])
        if np.any(np.diff(ys) >= 0):
            raise DomainError("knot heights must be strictly decreasing")
        if np.any(ys <= 0) or np.any(ys > 1) or any(k[1] <= 0 for k in ks):
            raise DomainError("knots must have heights in (0,1] and positive values")
        object.__setattr__(self, "knots", ks)

    def _value(self, y):
        return self._value_s(-np.log(y))

    def _value_s(self, s):
        ls = -np.log([k[0] for k in self.knots])
        lv = np.log([k[1] for k in self.knots])
        return np.exp(np.interp(s, ls, lv))

    def _breaks(self):
        return tuple(k[0] for k in self.knots)


@dataclass(frozen=True)
class Scaled(GaugeFunction):
    base: GaugeFunction
    factor: float

    def _value(self, y):
        return self.factor * self.base._value(y)

    def _value_s(self, s):
        return self.factor * self.base._value_s(s)

    def _breaks(self):
        return self.base._breaks()

    def square_function(self, y):
        return self.factor**2 * self.base.square_function(y)

    def log_integral(self, y):
        return self.factor * self.base.log_integral(y)

    def integral_from_zero(self, y):
        return self.factor * self.base.integral_from_zero(y)


def evaluate(g, y):
    return g(y)


def square_function(g, y):
    return g.square_function(y)


def lil_denominator(g, y):
    """sqrt(Psi(y) log log Psi(y)); requires Psi(y) > e^e."""
    Psi = g.square_function(y)
    if not Psi > E_E:
        raise RegimeError(f"height too large for LIL regime: Psi={Psi:.4g} <= e^e")
    return math.sqrt(Psi * math.log(math.log(Psi)))


@dataclass
class GaugeDiagnostics:
    averaging_constant_estimate: float
    doubling_constant_estimate: float
    nonincreasing: bool
    grid: np.ndarray = field(repr=False)
    converged: bool = True
    stable: bool = True

    @property
    def passes(self):
        return (self.converged and self.stable and self.nonincreasing
                and math.isfinite(self.averaging_constant_estimate))


def _sampled_constants(g, grid):
    A, ok = 0.0, True
    for y in grid:
        I0 = g.integral_from_zero(y)
        if not math.isfinite(I0):
            return math.inf, math.inf, False
        A = max(A, I0 / y / g(y))
    dbl = float(np.max(g(grid / 2) / g(grid)))
    return A, dbl, ok


def diagnose(g, grid_size=32):
    """Sampled estimates of the averaging constant A, the doubling constant
    and monotonicity on the geometric grid ``y = 2**(-k/4)``.

    A divergent ``int_0^y psi`` is reported through ``converged=False``.
    The grid is re-run at twice the density; ``stable`` records agreement of
    both sups within 1%.
    """
    if grid_size < 8:
        raise DomainError("grid_size must be at least 8")
    grid = 2.0 ** (-np.arange(grid_size) / 4.0)
    fine = 2.0 ** (-np.arange(2 * grid_size - 1) / 8.0)
    A, dbl, ok = _sampled_constants(g, grid)
    dense = np.unique(np.r_[fine, [b for b in g._breaks() if fine[-1] <= b <= 1]])[::-1]
    vals = g(dense)
    nonincr = bool(np.all(vals[1:] >= vals[:-1] * (1 - 1e-12)))
    if not ok:
        return GaugeDiagnostics(math.inf, dbl, nonincr, grid, converged=False, stable=False)
    A2, dbl2, _ = _sampled_constants(g, fine)
    stable = abs(A2 - A) <= 0.01 * A and abs(dbl2 - dbl) <= 0.01 * dbl
    return GaugeDiagnostics(A, dbl, nonincr, grid, converged=True, stable=stable)


def from_spec(spec):
    """Build a gauge from a config record such as ``{"kind": "constant", "B": 1}``."""
    kind = spec["kind"]
    scale = spec.get("scale", 1.0)
    if kind == "constant":
        g = Constant(spec.get("B", 1.0))
    elif kind == "shifted_log_power":
        g = ShiftedLogPower(spec["alpha"], spec.get("shift", 1.0))
    elif kind == "power_law":
        g = PowerLaw(spec["delta"])
    elif kind == "tabulated":
        g = Tabulated(tuple(map(tuple, spec["knots"])))
    else:
        raise DomainError(f"unknown gauge kind {kind!r}")
    return g if scale == 1.0 else g.scaled(scale)
