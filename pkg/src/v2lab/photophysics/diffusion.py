"""Spectral-diffusion delay curves: no-recapture and diffusion-only models."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from ..optim import FitResult, ParamSpec, fit_least_squares
from ..rng import substream
from .checkprobe import InsufficientDataError
from .models import CheckProbeRecords

MIN_DELAY_BINS = 5


def _check_rates(gamma_d, gamma_i, gamma):
    if gamma_d < 0 or gamma_i < 0:
        raise ValueError("rates must be non-negative")
    if gamma <= 0:
        raise ValueError("gamma must be positive")


def no_recapture_model(t, gamma_d, gamma_i, gamma, c0):
    """Mean heralded counts at signed delay ``t`` (ms).

    ``c0 / (1 + gamma_d |t| / gamma)``, times ``exp(-gamma_i t)`` for
    future delays only. ``gamma_d`` in MHz/ms, ``gamma`` in MHz.
    """
    _check_rates(gamma_d, gamma_i, gamma)
    t = np.asarray(t, dtype=float)
    out = c0 / (1.0 + gamma_d * np.abs(t) / gamma)
    return np.where(t > 0, out * np.exp(-gamma_i * np.clip(t, 0.0, None)), out)


def diffusion_only_model(t, gamma_d, gamma, c0):
    _check_rates(gamma_d, 0.0, gamma)
    t = np.asarray(t, dtype=float)
    return c0 / (1.0 + gamma_d * np.abs(t) / gamma)


def simulate_diffusion_records(delays_ms: Iterable[float], reps_per_delay: int, *, ratio: float,
                               gamma_i: float = 0.0, c0: float = 10.0, herald_mean: float = 10.0,
                               seed: int = 0) -> CheckProbeRecords:
    """Poisson-sample the no-recapture curve on a delay grid.

    ``ratio`` is ``gamma_d / gamma`` in 1/ms. For ``t > 0`` the check block is
    the herald and the probe block carries the delayed mean; for ``t <= 0``
    the roles swap. Herald counts are ``Poisson(herald_mean)``.
    """
    delays = np.asarray(list(delays_ms), dtype=float)
    rng = substream(seed, "diffusion")
    t = np.repeat(delays, reps_per_delay)
    mean = no_recapture_model(t, ratio, gamma_i, 1.0, c0)
    herald = rng.poisson(herald_mean, t.size)
    counter = rng.poisson(mean)
    future = t > 0
    check = np.where(future, herald, counter)
    probe = np.where(future, counter, herald)
    return CheckProbeRecords(np.arange(t.size), t, check, probe)


def bin_heralded_counts(records, threshold: int):
    """Mean counterpart counts per delay after heralding with ``>= threshold``.

    Future delays herald on the check block and average the probe block; past
    delays (``t <= 0``) herald on the probe and average the check.
    Returns ``(delays, means, n_heralded)`` for delays with at least one herald.
    """
    table = CheckProbeRecords.from_records(records)
    t = table.delay_ms
    chk = table.check_counts.astype(float)
    prb = table.probe_counts.astype(float)
    herald = np.where(t > 0, chk, prb)
    counter = np.where(t > 0, prb, chk)
    keep = herald >= threshold
    delays, inv = np.unique(t, return_inverse=True)
    n = np.bincount(inv[keep], minlength=delays.size)
    s = np.bincount(inv[keep], weights=counter[keep], minlength=delays.size)
    ok = n > 0
    return delays[ok], s[ok] / n[ok], n[ok]


def fit_spectral_diffusion(records, threshold: int = 1, model: str = "no_recapture",
                           gamma_assumed: float = 36.0, ratio_band: tuple[float, float] = (1.0, 3.0),
                           gamma_lifetime: float = 26.0) -> FitResult:
    """Fit the heralded delay curve and report ``gamma_d`` at an assumed linewidth.

    Only ``gamma_d / gamma`` is identifiable; it is fitted as ``ratio`` and
    scaled by ``gamma_assumed``. The band in ``extras`` rescales to linewidths
    ``ratio_band * gamma_lifetime``. Bins are weighted by the Poisson standard
    error of the mean predicted by a first unweighted pass.
    """
    if model not in ("no_recapture", "diffusion_only"):
        raise ValueError(f"unknown model {model!r}")
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    delays, means, n = bin_heralded_counts(records, threshold)
    if np.sum(delays > 0) == 0 or np.sum(delays < 0) == 0:
        raise InsufficientDataError("records must contain both signs of delay")
    if delays.size < MIN_DELAY_BINS:
        raise InsufficientDataError(f"only {delays.size} delay bins pass the threshold")

    c0_guess = float(np.max(means)) or 1.0
    half = _half_decay_delay(np.abs(delays[delays < 0]), means[delays < 0], c0_guess)
    ratio_guess = 1.0 / half if half else 1.0

    if model == "no_recapture":
        def f(t, ratio, gamma_i, c0):
            return no_recapture_model(t, ratio, gamma_i, 1.0, c0)
        specs = [ParamSpec("ratio", ratio_guess, 0.0, math.inf),
                 ParamSpec("gamma_i", 0.1 * ratio_guess, 0.0, math.inf),
                 ParamSpec("c0", c0_guess, 0.0, math.inf)]
    else:
        def f(t, ratio, c0):
            return diffusion_only_model(t, ratio, 1.0, c0)
        specs = [ParamSpec("ratio", ratio_guess, 0.0, math.inf),
                 ParamSpec("c0", c0_guess, 0.0, math.inf)]

    first = fit_least_squares(f, specs, delays, means, name=model)
    pred = f(delays, *first.values)
    floor = 1.0 / np.max(n)
    sigma = np.sqrt(np.maximum(pred, floor) / n)
    specs = [ParamSpec(s.name, max(v, s.lower), s.lower, s.upper) for s, v in zip(specs, first.values)]
    res = fit_least_squares(f, specs, delays, means, sigma, name=model)

    ratio, ratio_sigma = res.params["ratio"]
    res.params["gamma_d"] = (ratio * gamma_assumed, ratio_sigma * gamma_assumed)
    lo, hi = ratio_band
    res.extras.update(
        threshold=threshold,
        gamma_assumed=gamma_assumed,
        gamma_lifetime=gamma_lifetime,
        ratio_band=[lo, hi],
        gamma_d_band=[ratio * lo * gamma_lifetime, ratio * hi * gamma_lifetime],
        delays_ms=delays.tolist(),
        mean_counts=means.tolist(),
        n_heralded=n.tolist(),
    )
    return res


def _half_decay_delay(t, y, c0):
    if t.size < 2:
        return None
    order = np.argsort(t)
    t, y = t[order], y[order]
    below = np.flatnonzero(y <= 0.5 * c0)
    if below.size == 0:
        return float(t[-1]) * 2.0
    return float(max(t[below[0]], 1e-6))
