from __future__ import annotations

import math

import numpy as np

from ..optim import FitResult, ParamSpec, fit_least_squares

MIN_POWERS = 5


def saturation_curve(p, a, b, p_sat):
    """Saturating emitter term plus linear background: ``b*p + a*p/(p + p_sat)``."""
    p = np.asarray(p, dtype=float)
    return b * p + a * p / (p + p_sat)


def rho_at_psat(a: float, b: float, p_sat: float) -> float:
    """Signal fraction at the saturation power: ``(a/2) / (a/2 + b*p_sat)``."""
    a_sat = 0.5 * a
    b_sat = b * p_sat
    if a_sat + b_sat == 0:
        return 0.0
    return a_sat / (a_sat + b_sat)


def saturation_fit(powers, counts, counts_sigma=None, *, amplitude_floor: float = 1e-9) -> FitResult:
    """Fit the saturation curve (powers in uW, counts in kHz) and attach ``rho``.

    ``extras["rho_at_psat"]`` carries the signal/background fraction at the
    fitted saturation power with its first-order uncertainty. A vanishing
    saturating amplitude sets ``rho = 0`` and the ``no_saturation`` warning.
    """
    p = np.asarray(powers, dtype=float)
    c = np.asarray(counts, dtype=float)
    if np.unique(p).size < MIN_POWERS:
        raise ValueError(f"need at least {MIN_POWERS} distinct powers")
    if np.any(c < 0) or np.any(p < 0):
        raise ValueError("powers and counts must be non-negative")

    order = np.argsort(p)
    ps, cs = p[order], c[order]
    # linear tail slope as background guess, remainder as saturating amplitude
    k = max(2, ps.size // 3)
    slope = max(float(np.polyfit(ps[-k:], cs[-k:], 1)[0]), 0.0)
    a0 = max(float(cs[-1] - slope * ps[-1]), 1e-3 * max(cs[-1], 1e-12))
    half = cs - slope * ps
    crossing = np.flatnonzero(half >= 0.5 * a0)
    psat0 = float(ps[crossing[0]]) if crossing.size else float(np.median(ps))
    psat0 = max(psat0, 1e-6 * max(ps[-1], 1.0))

    specs = [ParamSpec("A", a0, 0.0, math.inf),
             ParamSpec("B", slope, 0.0, math.inf),
             ParamSpec("p_sat", psat0, 1e-12, math.inf)]
    res = fit_least_squares(saturation_curve, specs, p, c, counts_sigma, name="saturation")
    a, b, psat = (res.value(n) for n in ("A", "B", "p_sat"))
    if a <= amplitude_floor * max(float(np.max(c)), 1e-300):
        res.warnings.append("no_saturation")
        rho, rho_sigma = 0.0, 0.0
    else:
        rho = rho_at_psat(a, b, psat)
        # d rho / d(A, B, p_sat)
        denom = (0.5 * a + b * psat) ** 2
        grad = np.array([0.5 * b * psat, -0.5 * a * psat, -0.5 * a * b]) / denom
        var = float(grad @ res.covariance @ grad)
        rho_sigma = math.sqrt(var) if var >= 0 and math.isfinite(var) else math.inf
    res.extras["rho_at_psat"] = rho
    res.extras["rho_sigma"] = rho_sigma
    return res
