"""Voigt line shape via a rational approximation of the Faddeeva function."""

from __future__ import annotations

import math

import numpy as np

_SQRT2 = math.sqrt(2.0)
_GAUSS_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))


def faddeeva_humlicek(z):
    """``w(z) = exp(-z^2) erfc(-iz)`` for ``Im z >= 0`` (Humlicek's four-region W4 scheme).

    Relative accuracy is about 1e-4 over the upper half plane.
    """
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    t = y - 1j * x
    s = np.abs(x) + y
    w = np.empty_like(t)
    r1 = s >= 15.0
    r2 = (s >= 5.5) & ~r1
    r3 = (s < 5.5) & (y >= 0.195 * np.abs(x) - 0.176)
    r4 = ~(r1 | r2 | r3)
    if r1.any():
        tt = t[r1]
        w[r1] = tt * 0.5641896 / (0.5 + tt * tt)
    if r2.any():
        tt = t[r2]
        u = tt * tt
        w[r2] = tt * (1.410474 + u * 0.5641896) / (0.75 + u * (3.0 + u))
    if r3.any():
        tt = t[r3]
        num = 16.4955 + tt * (20.20933 + tt * (11.96482 + tt * (3.778987 + tt * 0.5642236)))
        den = 16.4955 + tt * (38.82363 + tt * (39.27121 + tt * (21.69274 + tt * (6.699398 + tt))))
        w[r3] = num / den
    if r4.any():
        tt = t[r4]
        u = tt * tt
        num = tt * (36183.31 - u * (3321.9905 - u * (1540.787 - u * (219.0313 - u * (
            35.76683 - u * (1.320522 - u * 0.56419))))))
        den = 32066.6 - u * (24322.84 - u * (9022.228 - u * (2186.181 - u * (
            364.2191 - u * (61.57037 - u * (1.841439 - u))))))
        w[r4] = np.exp(u) - num / den
    return w


def voigt_profile(f, sigma_g, gamma_l, amplitude=1.0, center=0.0):
    """Gaussian (std ``sigma_g``) convolved with a Lorentzian (HWHM ``gamma_l``).

    Normalized so the value at ``center`` equals ``amplitude``. Either width
    may be zero (pure Lorentzian / pure Gaussian), not both.
    """
    if sigma_g < 0 or gamma_l < 0:
        raise ValueError("widths must be non-negative")
    if sigma_g == 0 and gamma_l == 0:
        raise ValueError("sigma_g and gamma_l cannot both be zero")
    x = np.asarray(f, dtype=float) - center
    if sigma_g == 0:
        return amplitude / (1.0 + (x / gamma_l) ** 2)
    if gamma_l == 0:
        return amplitude * np.exp(-0.5 * (x / sigma_g) ** 2)
    scale = sigma_g * _SQRT2
    yv = gamma_l / scale
    w = faddeeva_humlicek((x + 1j * gamma_l) / scale).real
    w0 = faddeeva_humlicek(np.array([1j * yv])).real[0]
    return amplitude * w / w0


def voigt_fwhm(sigma_g: float, gamma_l: float) -> float:
    """Olivero-Longbothum approximation (about 0.02 % accurate)."""
    fg = _GAUSS_FWHM * sigma_g
    fl = 2.0 * gamma_l
    return 0.5346 * fl + math.sqrt(0.2166 * fl * fl + fg * fg)
