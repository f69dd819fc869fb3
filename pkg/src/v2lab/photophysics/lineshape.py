"""Lorentzian response and the regularized upper incomplete gamma function."""

from __future__ import annotations

import math

import numpy as np

_EPS = 1e-15
_TINY = 1e-300
_MAX_TERMS = 10_000


def lorentzian_response(f, gamma, c0):
    """Mean counts ``c0 * (gamma/2)**2 / (f**2 + (gamma/2)**2)`` at detuning ``f``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if c0 < 0:
        raise ValueError("c0 must be non-negative")
    hw2 = (0.5 * gamma) ** 2
    return c0 * hw2 / (np.square(f) + hw2)


def _log_prefactor(a, z):
    with np.errstate(divide="ignore"):
        return -z + a * np.log(z) - _lgamma(a)


def _lgamma(a):
    return np.vectorize(math.lgamma, otypes=[float])(a) if np.ndim(a) else math.lgamma(a)


def _gamma_series(a, z):
    """Lower regularized P(a, z) by its power series (vectorized)."""
    term = 1.0 / a
    total = term.copy()
    ap = a.copy()
    for _ in range(_MAX_TERMS):
        ap = ap + 1.0
        term = term * z / ap
        total = total + term
        if np.all(np.abs(term) <= np.abs(total) * _EPS):
            break
    return total * np.exp(_log_prefactor(a, z))


def _gamma_cfrac(a, z):
    """Upper regularized Q(a, z) by Lentz's continued fraction (vectorized)."""
    b = z + 1.0 - a
    c = np.full_like(z, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _EPS):
            break
    return np.exp(_log_prefactor(a, z)) * h


def _split(a, z, upper: bool):
    a = np.asarray(a, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    out = np.empty(z.shape)
    zero = z == 0.0
    inf = np.isinf(z)
    out[zero] = 1.0 if upper else 0.0
    out[inf] = 0.0 if upper else 1.0
    rest = ~(zero | inf)
    ser = rest & (z < a + 1.0)
    cf = rest & ~ser
    if np.any(ser):
        p = _gamma_series(a[ser], z[ser])
        out[ser] = 1.0 - p if upper else p
    if np.any(cf):
        q = _gamma_cfrac(a[cf], z[cf])
        out[cf] = q if upper else 1.0 - q
    return np.clip(out, 0.0, 1.0)


def incomplete_gamma(a, z):
    """Normalized upper incomplete gamma ``Gamma(a, z) / Gamma(a)``.

    Series below ``z = a + 1``, continued fraction above. For integer ``a``
    this is ``P(Poisson(z) < a)``.
    """
    a_arr, z_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(z, dtype=float))
    if np.any(~(a_arr > 0)):
        raise ValueError("incomplete_gamma requires a > 0")
    if np.any(~(z_arr >= 0)):
        raise ValueError("incomplete_gamma requires z >= 0")
    out = _split(a_arr, z_arr, upper=True).reshape(a_arr.shape)
    return out if out.ndim else float(out)


def poisson_tail(threshold: int, mean):
    """``P(Poisson(mean) >= threshold)``, i.e. ``1 - incomplete_gamma(threshold, mean)``.

    Computed from the lower series directly so small tails keep full
    relative precision instead of cancelling against 1.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    m = np.asarray(mean, dtype=float)
    if np.any(~(m >= 0)):
        raise ValueError("mean must be non-negative")
    out = _split(np.full(m.shape, float(threshold)), m, upper=False).reshape(m.shape)
    return out if out.ndim else float(out)


def log_poisson_tail(threshold: int, mean):
    """Natural log of :func:`poisson_tail`, finite far into the tail."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    m = np.asarray(mean, dtype=float)
    if np.any(~(m >= 0)):
        raise ValueError("mean must be non-negative")
    a = np.full(m.shape, float(threshold)).ravel()
    z = m.ravel()
    out = np.full(z.shape, -np.inf)
    ser = (z > 0) & (z < a + 1.0)
    cf = z >= a + 1.0
    if np.any(ser):
        aa, zz = a[ser], z[ser]
        term = 1.0 / aa
        total = term.copy()
        ap = aa.copy()
        for _ in range(_MAX_TERMS):
            ap = ap + 1.0
            term = term * zz / ap
            total = total + term
            if np.all(term <= total * _EPS):
                break
        out[ser] = np.log(total) + _log_prefactor(aa, zz)
    if np.any(cf):
        out[cf] = np.log1p(-np.minimum(_gamma_cfrac(a[cf], z[cf]), 1.0))
    out = out.reshape(m.shape)
    return out if out.ndim else float(out)
