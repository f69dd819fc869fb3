from __future__ import annotations

import math

import numpy as np

from .models import FarFieldProfile


def collection_efficiency(profile: FarFieldProfile, na: float) -> float:
    """Fraction of the emitted power inside the objective's acceptance cone.

    Trapezoid integral of the boundary power from 0 to ``asin(na)`` (the last
    panel is cut by linear interpolation), divided by the total power.
    """
    if not 0.0 < na <= 1.0:
        raise ValueError("numerical aperture must lie in (0, 1]")
    theta_max = math.asin(na)
    th = profile.theta
    p = profile.p_boundary
    inside = th < theta_max
    th_cut = np.append(th[inside], theta_max)
    p_cut = np.append(p[inside], np.interp(theta_max, th, p))
    if th_cut.size < 2:
        return 0.0
    eta = float(np.trapezoid(p_cut, th_cut)) / profile.p_tot
    return min(max(eta, 0.0), 1.0)
