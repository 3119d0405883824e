"""The self-improvement threshold for positive sequences and gauges.

Sequences are handled through ``log a_k`` so that geometric growth never
overflows, and partial sums are formed with log-sum-exp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, RegimeError
from .gauges import E_E, diagnose

LOG_E_E = math.e


class PositiveSequence:
    """a_1, a_2, ... given explicitly, from a gauge, or by a parametric kind.

    ``log_values(n)`` returns ``log a_k`` for k = 1..n.
    """

    def __init__(self, kind, params=None, values=None, gauge=None):
        self.kind = kind
        self.params = params or {}
        self._values = None if values is None else np.asarray(values, float)
        self._gauge = gauge
        if self._values is not None and np.any(~(self._values > 0)):
            raise DomainError("sequence values must be positive")

    def __repr__(self):
        return f"PositiveSequence({self.kind}, {self.params})"

    @property
    def length(self):
        return None if self._values is None else len(self._values)

    def log_values(self, n):
        k = np.arange(1, n + 1, dtype=float)
        if self.kind == "explicit":
            if n > len(self._values):
                raise DomainError(f"explicit sequence has only {len(self._values)} terms")
            return np.log(self._values[:n])
        if self.kind == "constant":
            return np.full(n, math.log(self.params.get("value", 1.0)))
        if self.kind == "power_of_index":
            return self.params["beta"] * np.log(k)
        if self.kind == "geometric":
            return self.params["delta"] * k * math.log(2.0)
        if self.kind == "gauge":
            return np.log(self._gauge._value_s(k * math.log(2.0)))
        raise DomainError(f"unknown sequence kind {self.kind!r}")

    def values(self, n):
        return np.exp(self.log_values(n))


def explicit(values):
    return PositiveSequence("explicit", values=values)


def constant(value=1.0):
    if not value > 0:
        raise DomainError("constant must be positive")
    return PositiveSequence("constant", {"value": float(value)})


def power_of_index(beta):
    return PositiveSequence("power_of_index", {"beta": float(beta)})


def geometric(delta):
    return PositiveSequence("geometric", {"delta": float(delta)})


def from_gauge(g):
    """a_k = psi(2^-k)."""
    return PositiveSequence("gauge", {"gauge": repr(g)}, gauge=g)


def from_spec(spec):
    kind = spec["kind"]
    if kind == "explicit":
        return explicit(spec["values"])
    if kind == "constant":
        return constant(spec.get("value", 1.0))
    if kind == "power_of_index":
        return power_of_index(spec["beta"])
    if kind == "geometric":
        return geometric(spec["delta"])
    if kind == "gauge":
        from .gauges import from_spec as gauge_spec
        return from_gauge(gauge_spec(spec["gauge"]))
    raise DomainError(f"unknown sequence kind {kind!r}")


# -- conditions ---------------------------------------------------------------------

@dataclass
class ConditionReport:
    n: int
    monotone: bool
    doubling_constant: float
    log_concave: bool
    worst_concavity: float
    trend_tail_slope: float
    threshold_consistent: bool

    @property
    def doubling(self):
        return self.monotone and math.isfinite(self.doubling_constant)

    @property
    def threshold_failed(self):
        return not self.threshold_consistent

    @property
    def all_hold(self):
        return self.doubling and self.log_concave and self.threshold_consistent


def _tail_slope(n_idx, q):
    """Least-squares slope of log|q| against log n over the last half."""
    half = len(q) // 2
    nn, qq = n_idx[half:], np.abs(q[half:])
    if np.all(qq == 0):
        return 0.0, True
    keep = qq > 0
    slope = float(np.polyfit(np.log(nn[keep]), np.log(qq[keep]), 1)[0])
    return slope, slope < 0


def check_conditions(s, n=1024):
    """(i) monotone with doubling constant C, (ii) log-concavity, (iii) the
    threshold trend of log a_n (log n)/n over the last half of the data."""
    if n < 16:
        raise DomainError("need at least 16 terms")
    la = s.log_values(n)
    steps = np.diff(la)
    monotone = bool(np.all(steps >= -1e-12))
    C = float(np.exp(steps.max()))
    curv = la[2:] + la[:-2] - 2 * la[1:-1]
    worst = float(curv.max())
    concave = bool(worst <= 1e-12 * max(1.0, float(np.abs(la).max())))
    k = np.arange(2, n + 1, dtype=float)
    q = la[1:] * np.log(k) / k
    slope, ok = _tail_slope(k, q)
    return ConditionReport(n, monotone, C, concave, worst, slope, ok)


def _ratio_from_logs(log_s2, log_s1):
    # log(S2 log log S2) = log S2 + log(log(log S2))
    return math.exp(0.5 * (log_s2 + math.log(math.log(log_s2))) - log_s1)


def improvement_ratio(s, n):
    """sqrt(S2 log log S2) / S1 with S2 = sum a_k^2 and S1 = sum a_k, k <= n."""
    la = s.log_values(n)
    log_s2 = float(logsumexp(2 * la))
    if not log_s2 > LOG_E_E:
        raise RegimeError("sum of squares must exceed e^e")
    return _ratio_from_logs(log_s2, float(logsumexp(la)))


def improvement_ratio_ladder(s, ns):
    """improvement_ratio at several n (NaN where the guard fails), one pass."""
    ns = np.asarray(ns, dtype=int)
    la = s.log_values(int(ns.max()))
    c2 = np.logaddexp.accumulate(2 * la)
    c1 = np.logaddexp.accumulate(la)
    out = np.full(len(ns), np.nan)
    for i, m in enumerate(ns):
        if c2[m - 1] > LOG_E_E:
            out[i] = _ratio_from_logs(float(c2[m - 1]), float(c1[m - 1]))
    return out


@dataclass
class MultiplicativeForm:
    lambdas: np.ndarray              # lambda_1 = 0, lambda_k = a_k/a_{k-1} - 1
    bounded: bool                    # 0 <= lambda_k <= C - 1 for k >= 2
    nonincreasing: bool              # lambda_k >= lambda_{k+1} for k >= 2
    roundtrip_error: float           # max relative gap of prod(1 + lambda) vs a_n / a_1
    sum_dominates: bool              # (n-1) lambda_n <= sum_{2<=k<=n} lambda_k
    tail_decreasing: bool            # (sum lambda_k) (log n)/n decreasing on the last half


def multiplicative_form(s, n=1024, C=None):
    """lambda_k = a_k / a_{k-1} - 1 with a_1 normalized to 1 (so lambda_1 = 0)."""
    la = s.log_values(n)
    lam = np.zeros(n)
    lam[1:] = np.expm1(np.diff(la))
    C = float(np.exp(np.diff(la).max())) if C is None else C
    tail = lam[1:]
    bounded = bool(np.all(tail >= -1e-15) and np.all(tail <= C - 1 + 1e-12))
    # steps of log a_k carry roundoff proportional to |log a_k|
    nonincr = bool(np.all(np.diff(tail) <= 1e-13 * max(1.0, float(np.abs(la).max()))))
    rebuilt = np.cumsum(np.log1p(lam))
    err = float(np.max(np.abs(np.expm1(rebuilt - (la - la[0])))))
    k = np.arange(1, n + 1, dtype=float)
    csum = np.cumsum(lam)
    # lambda_1 = 0 carries no information, so n - 1 terms enter the sum
    dominates = bool(np.all((k[1:] - 1) * lam[1:] <= csum[1:] * (1 + 1e-12) + 1e-300))
    trend = csum[1:] * np.log(k[1:]) / k[1:]
    half = len(trend) // 2
    decreasing = bool(np.all(np.diff(trend[half:]) <= 1e-15))
    return MultiplicativeForm(lam, bounded, nonincr, err, dominates, decreasing)


# -- continuous criterion -----------------------------------------------------------

def default_ladder():
    """y = 2^(-2^k), k = 2..7."""
    return 2.0 ** -(2.0 ** np.arange(2, 8))


@dataclass
class ContinuousReport:
    heights: np.ndarray
    ratio: np.ndarray                 # sqrt(Psi log log Psi) / int_y^1 psi/t, NaN where guarded
    threshold_quantity: np.ndarray    # log psi(y) log log(1/y) / log(1/y)
    concave: bool
    passes_diagnose: bool

    @property
    def decreasing(self):
        r = self.ratio[np.isfinite(self.ratio)]
        return bool(len(r) >= 2 and np.all(np.diff(r) < 0))


def continuous_threshold_check(g, ladder=None):
    ys = default_ladder() if ladder is None else np.asarray(ladder, float)
    ratio = np.full(len(ys), np.nan)
    for i, y in enumerate(ys):
        Psi = g.square_function(y)
        if Psi > E_E:
            ratio[i] = math.sqrt(Psi * math.log(math.log(Psi))) / g.log_integral(y)
    L = -np.log(ys)
    # log psi(y) computed in log coordinates so tiny heights do not underflow
    log_psi = np.log(g._value_s(L))
    with np.errstate(invalid="ignore", divide="ignore"):
        thr = np.where(L > 1, log_psi * np.log(L) / L, np.nan)
    inner = ys[(ys <= 0.5)]
    concave = bool(np.all(g._value_s(-np.log(inner / 2)) * g._value_s(-np.log(2 * inner))
                          <= g._value_s(-np.log(inner)) ** 2 * (1 + 1e-12)))
    return ContinuousReport(ys, ratio, thr, concave, diagnose(g).passes)
