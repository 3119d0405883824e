"""Vectorized Gauss-Legendre panel quadrature.

Integrals of the form ``int_y^1 f(t) dt`` over scale-invariant integrands are
done after the substitution ``t = exp(-s)``, with initial panels one octave
(``ln 2`` in ``s``) wide.  Panels are compared at ``n`` and ``2n`` nodes and
bisected until the difference meets the tolerance.
"""
from functools import lru_cache

import numpy as np

from .errors import QuadratureError

LN2 = np.log(2.0)


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _panel_rule(a, b, n):
    # nodes/weights for every panel [a_k, b_k]; shapes (K, n)
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)[:, None]
    return a[:, None] + half * (x + 1.0), half * w


def adaptive_gl(f, a, b, *, rtol=1e-8, atol=1e-14, n=16, breakpoints=(), max_panels=20000):
    """Integrate a vectorized ``f`` over ``[a, b]``.

    Returns ``(value, error_estimate)``.  ``breakpoints`` seed the initial
    panel edges (kinks of the integrand belong there).
    """
    if b == a:
        return 0.0, 0.0
    edges = np.unique(np.clip(np.r_[a, np.asarray(breakpoints, float), b], a, b))
    lo, hi = edges[:-1], edges[1:]
    accepted, accepted_err = 0.0, 0.0
    total_len = b - a
    n_panels = len(lo)
    while len(lo):
        t1, w1 = _panel_rule(lo, hi, n)
        t2, w2 = _panel_rule(lo, hi, 2 * n)
        f1 = np.asarray(f(t1.ravel()), float).reshape(t1.shape)
        f2 = np.asarray(f(t2.ravel()), float).reshape(t2.shape)
        i1 = (w1 * f1).sum(axis=1)
        i2 = (w2 * f2).sum(axis=1)
        err = np.abs(i2 - i1)
        scale = abs(accepted + i2.sum())
        budget = np.maximum(atol, rtol * scale) * (hi - lo) / total_len
        ok = (err <= budget) | ((hi - lo) < 1e-13 * total_len)
        accepted += i2[ok].sum()
        accepted_err += err[ok].sum()
        if ok.all():
            break
        mid = 0.5 * (lo[~ok] + hi[~ok])
        lo, hi = np.r_[lo[~ok], mid], np.r_[mid, hi[~ok]]
        n_panels += len(mid)
        if n_panels > max_panels:
            partial = accepted + i2[~ok].sum()
            raise QuadratureError("panel budget exhausted", partial=partial)
    if not np.isfinite(accepted):
        raise QuadratureError("non-finite integrand", partial=accepted)
    return float(accepted), float(accepted_err)


def integrate_log(f, y, top=1.0, *, rtol=1e-8, atol=1e-14, n=16, extra_breaks=()):
    """``int_y^top f(t) dt`` via ``t = exp(-s)`` with octave-wide initial panels."""
    if y == top:
        return 0.0, 0.0
    s_lo, s_hi = -np.log(top), -np.log(y)
    octaves = s_lo + LN2 * np.arange(1, int(np.ceil((s_hi - s_lo) / LN2)))
    breaks = np.r_[octaves, -np.log(np.asarray(extra_breaks, float))] if len(extra_breaks) else octaves

    def g(s):
        t = np.exp(-s)
        return f(t) * t

    return adaptive_gl(g, s_lo, s_hi, rtol=rtol, atol=atol, n=n, breakpoints=breaks)


def integrate_log_batch(f, y, top=1.0, *, rtol=1e-8, atol=1e-12, n=16, max_panels=4096):
    """Row-wise ``int_{y_i}^top f_i(t) dt`` for an array of lower limits.

    ``f`` receives a ``(P, M)`` array of heights (row ``i`` belongs to
    ``y[i]``) and returns values of the same shape.  All rows share one panel
    layout on a normalized variable, refined wherever any row needs it.
    Returns ``(values, error_estimates)``.
    """
    y = np.atleast_1d(np.asarray(y, float))
    s_lo = -np.log(top)
    span = -np.log(y) - s_lo
    out = np.zeros(len(y))
    errs = np.zeros(len(y))
    if not np.any(span > 0):
        return out, errs
    m0 = max(1, int(np.ceil(span.max() / LN2)))
    lo = np.arange(m0) / m0
    hi = (np.arange(m0) + 1) / m0
    n_panels = m0
    while len(lo):
        ests = []
        for nn in (n, 2 * n):
            x, w = gauss_legendre(nn)
            sig = lo[:, None] + 0.5 * (hi - lo)[:, None] * (x + 1.0)       # (K, nn)
            s = s_lo + span[:, None, None] * sig[None]                      # (P, K, nn)
            t = np.exp(-s)
            vals = np.asarray(f(t.reshape(len(y), -1)), float).reshape(t.shape) * t
            wk = 0.5 * (hi - lo)[:, None] * w                               # (K, nn)
            ests.append((vals * wk[None]).sum(axis=2) * span[:, None])      # (P, K)
        i1, i2 = ests
        err = np.abs(i2 - i1)
        scale = np.abs(out + i2.sum(axis=1))
        budget = np.maximum(atol, rtol * scale)[:, None] * (hi - lo)[None]
        ok = np.all(err <= budget, axis=0) | ((hi - lo) < 1e-12)
        out += i2[:, ok].sum(axis=1)
        errs += err[:, ok].sum(axis=1)
        if ok.all():
            break
        mid = 0.5 * (lo[~ok] + hi[~ok])
        lo, hi = np.r_[lo[~ok], mid], np.r_[mid, hi[~ok]]
        n_panels += len(mid)
        if n_panels > max_panels:
            raise QuadratureError("panel budget exhausted", partial=out + i2[:, ~ok].sum(axis=1))
    return out, errs


def cube_nodes(lows, side, n, d):
    """Tensor Gauss-Legendre nodes on axis-aligned cubes.

    ``lows`` has shape ``(C, d)``.  Returns points ``(C, n**d, d)`` and
    averaging weights ``(n**d,)`` summing to one.
    """
    x, w = gauss_legendre(n)
    unit = 0.5 * (x + 1.0)
    grids = np.meshgrid(*([unit] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)                    # (n**d, d)
    wts = np.ones(1)
    for _ in range(d):
        wts = np.multiply.outer(wts, 0.5 * w).ravel()
    lows = np.asarray(lows, float).reshape(-1, d)
    return lows[:, None, :] + side * pts[None], wts
