"""Threshold-heralded check-probe spectroscopy.

A check block with ``m >= T`` counts heralds the emitter near the check laser.
The emitter-frequency posterior under a flat prior is proportional to
``P(Poisson(lambda(f - f1)) >= T)``; the expected probe spectrum is that
posterior convolved with the Lorentzian response.
"""

from __future__ import annotations

import logging
import math
import warnings
from typing import Mapping

import numpy as np

from ..optim import FitResult, ParamSpec, fit_least_squares
from ..rng import chunks, substream
from .lineshape import log_poisson_tail, lorentzian_response
from .models import CheckProbeRecords, EmitterModel, FrequencyPrior

log = logging.getLogger(__name__)

TAIL_TOLERANCE = 1e-3
GRID_STEPS_PER_LINEWIDTH = 20
MIN_SPAN_LINEWIDTHS = 10.0


class DensityTruncationWarning(UserWarning):
    """The frequency grid holds less than 99.9% of the heralded mass."""


class InsufficientDataError(ValueError):
    pass


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    d = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def _tail_mass(threshold: int, gamma: float, c0: float, distance: float) -> float:
    # integral beyond |f - f1| = distance of the bound lambda^T / T!, lambda <= c0 (gamma/2)^2 / f^2
    if distance <= 0:
        return math.inf
    log_k = threshold * math.log(c0 * (0.5 * gamma) ** 2) if c0 > 0 else -math.inf
    log_val = log_k + (1 - 2 * threshold) * math.log(distance) - math.log(2 * threshold - 1) - math.lgamma(threshold + 1)
    return math.exp(log_val) if log_val < 700 else math.inf


def _unnormalized_log_density(f_grid, threshold, gamma, c0, f1):
    lam = lorentzian_response(np.asarray(f_grid, dtype=float) - f1, gamma, c0)
    return log_poisson_tail(int(threshold), lam)


def heralded_spectral_density(f_grid, threshold: int, emitter: EmitterModel, f1: float = 0.0,
                              *, warn: bool = True) -> np.ndarray:
    """Posterior density of the emitter frequency given a check count ``>= threshold``.

    Normalized with the trapezoid rule on ``f_grid`` (MHz), i.e. the grid is
    treated as the support of a flat prior. If the grid misses more than 0.1%
    of the heralded mass a :class:`DensityTruncationWarning` is issued.
    """
    return _density(np.asarray(f_grid, dtype=float), int(threshold), emitter.gamma, emitter.c0, f1, warn)


def _density(grid, threshold, gamma, c0, f1, warn=True):
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    if grid.ndim != 1 or grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise ValueError("f_grid must be ascending with at least 3 points")
    logd = _unnormalized_log_density(grid, threshold, gamma, c0, f1)
    peak = np.max(logd)
    if not np.isfinite(peak):
        raise ValueError("heralding probability is zero everywhere on the grid")
    dens = np.exp(logd - peak)
    norm = float(np.sum(_trapezoid_weights(grid) * dens))
    if warn:
        tails = _tail_mass(threshold, gamma, c0, f1 - grid[0]) + _tail_mass(threshold, gamma, c0, grid[-1] - f1)
        inside = norm * math.exp(peak) if peak < 700 else math.inf
        frac = tails / (tails + inside) if math.isfinite(tails) else 1.0
        if frac > TAIL_TOLERANCE:
            warnings.warn(
                f"grid [{grid[0]:g}, {grid[-1]:g}] MHz may miss {frac:.2%} of the heralded mass "
                f"at T={threshold}; density is conditioned on the grid",
                DensityTruncationWarning,
                stacklevel=3,
            )
    return dens / norm


def density_grid(gamma: float, f1: float, support: tuple[float, float] | None = None,
                 probe: np.ndarray | None = None) -> np.ndarray:
    """Uniform emitter-frequency grid with spacing <= gamma/20 and span >= 10 gamma."""
    if support is None:
        lo = hi = f1
        if probe is not None and len(probe):
            lo, hi = float(np.min(probe)), float(np.max(probe))
        half = 0.5 * MIN_SPAN_LINEWIDTHS * gamma
        lo, hi = min(lo, f1 - half), max(hi, f1 + half)
    else:
        lo, hi = map(float, support)
    n = int(math.ceil((hi - lo) / (gamma / GRID_STEPS_PER_LINEWIDTH))) + 1
    return np.linspace(lo, hi, max(n, 3))


def _spectrum_moments(f, threshold, gamma, c0, f1, support, warn, grid=None):
    f = np.asarray(f, dtype=float)
    if grid is None:
        grid = density_grid(gamma, f1, support, f)
    p = _density(grid, threshold, gamma, c0, f1, warn) * _trapezoid_weights(grid)
    lam = lorentzian_response(f[:, None] - grid[None, :], gamma, c0)
    mean = lam @ p
    second = (lam * lam) @ p
    return mean, second


def checkprobe_spectrum(f_grid, threshold: int, gamma: float, c0: float, f1: float = 0.0,
                        support: tuple[float, float] | None = None, *, warn: bool = False,
                        grid: np.ndarray | None = None) -> np.ndarray:
    """Expected probe counts at probe detunings ``f_grid`` (MHz).

    ``support`` is the emitter-frequency range of the flat prior; by default it
    covers the probe grid and at least ``f1 +- 5 gamma``. ``grid`` pins the
    emitter-frequency quadrature grid (fits keep it fixed across iterations).
    """
    mean, _ = _spectrum_moments(f_grid, int(threshold), gamma, c0, f1, support, warn, grid)
    return mean


def checkprobe_variance(f_grid, threshold: int, gamma: float, c0: float, f1: float = 0.0,
                        support: tuple[float, float] | None = None,
                        grid: np.ndarray | None = None) -> np.ndarray:
    """Variance of a single post-selected probe count (Poisson mixed over the posterior)."""
    mean, second = _spectrum_moments(f_grid, int(threshold), gamma, c0, f1, support, False, grid)
    return mean + second - mean * mean


def simulate_check_probe(emitter: EmitterModel, f1: float, block_pairs: int,
                         prior: FrequencyPrior | None = None, seed: int = 0,
                         probe_detunings=None, delay_ms: float = 0.0) -> CheckProbeRecords:
    """Monte Carlo check/probe pairs with a frozen emitter frequency per pair.

    Repetition ``k`` probes at ``probe_detunings[k % len(probe_detunings)]``
    (default: the check frequency ``f1``). Draws come from per-chunk
    substreams so the output does not depend on execution order.
    """
    if block_pairs < 1:
        raise ValueError("block_pairs must be >= 1")
    if prior is None:
        prior = FrequencyPrior("dirac", emitter.f0 * 1e3)
    probes = np.atleast_1d(np.asarray(f1 if probe_detunings is None else probe_detunings, dtype=float))
    reps = np.arange(block_pairs)
    probe_f = probes[reps % probes.size]
    check = np.empty(block_pairs, dtype=np.int64)
    probe = np.empty(block_pairs, dtype=np.int64)
    for k, a, b in chunks(block_pairs):
        rng = substream(seed, "check-probe", k)
        fe = prior.sample(rng, b - a)
        if emitter.c0 == 0:
            check[a:b] = 0
            probe[a:b] = 0
            continue
        check[a:b] = rng.poisson(lorentzian_response(fe - f1, emitter.gamma, emitter.c0))
        probe[a:b] = rng.poisson(lorentzian_response(probe_f[a:b] - fe, emitter.gamma, emitter.c0))
    return CheckProbeRecords(reps, delay_ms, check, probe, probe_f)


def postselect_probe_spectrum(records, threshold: int):
    """Mean probe counts per probe detuning for pairs with check counts ``>= threshold``.

    Returns ``(detunings, mean, n_passing)`` over every detuning present in
    ``records``; detunings with no passing pair have ``mean = nan``.
    """
    table = CheckProbeRecords.from_records(records)
    det = table.probe_detuning_mhz
    chk = table.check_counts
    prb = table.probe_counts.astype(float)
    grid, inv = np.unique(det, return_inverse=True)
    keep = chk >= threshold
    n = np.bincount(inv[keep], minlength=grid.size)
    s = np.bincount(inv[keep], weights=prb[keep], minlength=grid.size)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(n > 0, s / np.maximum(n, 1), np.nan)
    return grid, mean, n


def fit_checkprobe_linewidth(spectra_by_threshold: Mapping[int, tuple], gamma_lifetime: float,
                             f1: float = 0.0, support: tuple[float, float] | None = None,
                             initial: tuple[float, float] | None = None,
                             min_pairs: int = 2) -> FitResult:
    """Global (gamma, c0) fit of threshold-swept probe spectra.

    Each value is ``(f_grid, mean_counts)`` or ``(f_grid, mean_counts,
    n_pairs)``. With pair counts the fit is weighted by the model-predicted
    variance of the mean (second pass after an unweighted first pass).
    """
    if len(spectra_by_threshold) < 3:
        raise InsufficientDataError("need at least 3 thresholds")
    if not gamma_lifetime > 0:
        raise ValueError("gamma_lifetime must be positive")
    thresholds, grids, means, counts, raw = [], [], [], [], []
    for t in sorted(spectra_by_threshold):
        entry = spectra_by_threshold[t]
        g = np.asarray(entry[0], dtype=float)
        m = np.asarray(entry[1], dtype=float)
        n = np.asarray(entry[2], dtype=float) if len(entry) > 2 else None
        raw.append(g)
        ok = np.isfinite(m) if n is None else np.isfinite(m) & (n >= min_pairs)
        if not np.any(ok):
            log.info("threshold %d has no populated bins; skipped", t)
            continue
        thresholds.append(int(t))
        grids.append(g[ok])
        means.append(m[ok])
        counts.append(None if n is None else n[ok])
    lo = max(g.min() for g in raw)
    hi = min(g.max() for g in raw)
    if lo >= hi:
        raise ValueError("threshold spectra do not share an overlapping frequency grid")
    if len(thresholds) < 3:
        raise InsufficientDataError("fewer than 3 thresholds have populated bins")
    nonempty = grids
    if support is None:
        all_f = np.concatenate(nonempty)
        support = (float(all_f.min()), float(all_f.max()))

    x_index = np.concatenate([np.full(g.size, i) for i, g in enumerate(grids)])
    y = np.concatenate(means)
    f_all = np.concatenate(grids)

    def model(x, gamma, c0):
        out = np.empty(x.shape)
        for i, t in enumerate(thresholds):
            sel = x == i
            if np.any(sel):
                out[sel] = checkprobe_spectrum(f_all[sel], t, gamma, c0, f1, support, grid=quad_grid)
        return out

    if initial is None:
        top = int(np.argmax([np.nanmax(m) if m.size else -np.inf for m in means]))
        c0_guess = float(np.nanmax(means[top])) if means[top].size else float(np.nanmax(y))
        gamma_guess = _halfmax_width(grids[-1], means[-1]) or 2.0 * gamma_lifetime
        initial = (gamma_guess, max(c0_guess, 1e-3))
    quad_grid = density_grid(min(float(initial[0]), gamma_lifetime) / 2.0, f1, support)
    specs = [ParamSpec("gamma", float(initial[0]), 1e-3, math.inf),
             ParamSpec("c0", float(initial[1]), 0.0, math.inf)]
    res = fit_least_squares(model, specs, x_index, y, name="checkprobe_convolution")

    if all(c is not None for c in counts):
        n_all = np.concatenate(counts)
        g0, c00 = res.value("gamma"), res.value("c0")
        var = np.empty_like(y)
        for i, t in enumerate(thresholds):
            sel = x_index == i
            if np.any(sel):
                var[sel] = checkprobe_variance(f_all[sel], t, g0, c00, f1, support, quad_grid)
        sigma = np.sqrt(np.maximum(var, 1e-6) / n_all)
        specs = [ParamSpec("gamma", g0, 1e-3, math.inf), ParamSpec("c0", c00, 0.0, math.inf)]
        res = fit_least_squares(model, specs, x_index, y, sigma, name="checkprobe_convolution")

    g, sg = res.params["gamma"]
    res.extras.update(
        thresholds=thresholds,
        gamma_lifetime=gamma_lifetime,
        ratio=g / gamma_lifetime,
        ratio_sigma=sg / gamma_lifetime,
        support_mhz=list(support),
    )
    return res


def _halfmax_width(grid, values):
    if grid.size < 3:
        return None
    v = np.asarray(values, dtype=float)
    half = 0.5 * np.nanmax(v)
    above = grid[v >= half]
    if above.size < 2:
        return None
    return float(above.max() - above.min())


def apparent_fwhm(f_grid, values) -> float:
    """FWHM of a single-peaked sampled curve by linear interpolation at half maximum."""
    f = np.asarray(f_grid, dtype=float)
    v = np.asarray(values, dtype=float)
    k = int(np.argmax(v))
    half = 0.5 * v[k]
    left = k
    while left > 0 and v[left] > half:
        left -= 1
    right = k
    while right < v.size - 1 and v[right] > half:
        right += 1
    if v[left] > half or v[right] > half:
        raise ValueError("curve does not fall to half maximum inside the grid")
    fl = np.interp(half, [v[left], v[left + 1]], [f[left], f[left + 1]])
    fr = np.interp(half, [v[right], v[right - 1]], [f[right], f[right - 1]])
    return float(fr - fl)
