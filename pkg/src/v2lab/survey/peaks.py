"""Automated PLE peak detection and a synthetic pillar generator."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, medfilt

from ..optim import FitError, ParamSpec, fit_least_squares
from ..rng import substream
from .voigt import voigt_fwhm, voigt_profile

log = logging.getLogger(__name__)

MIN_SEPARATION_GHZ = 2.0
MIN_FWHM_MHZ = 50.0
MAX_FWHM_MHZ = 3000.0
MIN_AMPLITUDE_KHZ = 0.03
PROMINENCE_NOISE_FACTOR = 3.0
MIN_AMPLITUDE_SIGNIFICANCE = 3.0
MAX_ITER = 60
_MAD_TO_SIGMA = 1.4826


@dataclass
class PleSpectrum:
    pillar_id: str
    frequency_ghz: np.ndarray
    rate_khz: np.ndarray

    def __post_init__(self):
        self.frequency_ghz = np.asarray(self.frequency_ghz, dtype=float)
        self.rate_khz = np.asarray(self.rate_khz, dtype=float)
        if self.frequency_ghz.shape != self.rate_khz.shape:
            raise ValueError("frequency and rate arrays differ in shape")
        if np.any(np.diff(self.frequency_ghz) <= 0):
            raise ValueError("frequency grid must be strictly ascending")
        if np.any(self.rate_khz < 0):
            raise ValueError("count rates must be non-negative")


@dataclass
class PlePeak:
    center_ghz: float
    amplitude_khz: float
    fwhm_mhz: float
    sigma_g_mhz: float
    gamma_l_mhz: float
    sigmas: dict = field(default_factory=dict)

    def satisfies_constraints(self) -> bool:
        return (MIN_FWHM_MHZ < self.fwhm_mhz < MAX_FWHM_MHZ
                and self.amplitude_khz >= MIN_AMPLITUDE_KHZ)

    def to_dict(self) -> dict:
        return {
            "center_ghz": self.center_ghz,
            "amplitude_khz": self.amplitude_khz,
            "fwhm_mhz": self.fwhm_mhz,
            "sigma_g_mhz": self.sigma_g_mhz,
            "gamma_l_mhz": self.gamma_l_mhz,
            "sigmas": dict(self.sigmas),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PlePeak":
        return cls(**{k: d[k] for k in ("center_ghz", "amplitude_khz", "fwhm_mhz",
                                        "sigma_g_mhz", "gamma_l_mhz")},
                   sigmas=dict(d.get("sigmas", {})))


def _voigt_baseline(f, c, amp, sg, gl, base):
    sg, gl = max(sg, 0.0), max(gl, 0.0)
    if sg == 0.0 and gl == 0.0:
        return np.full_like(f, base)
    return base + voigt_profile(f, sg, gl, amp, c)


def robust_noise(rate) -> float:
    """Per-point noise from the median absolute deviation of first differences."""
    d = np.diff(np.asarray(rate, dtype=float))
    return _MAD_TO_SIGMA * float(np.median(np.abs(d - np.median(d)))) / math.sqrt(2.0)


def _fit_candidate(f, y, f0, width_ghz, step):
    half = max(1.0, 2.0 * width_ghz)
    sel = np.abs(f - f0) <= half
    if sel.sum() < 6:
        raise FitError("window too small")
    fx, fy = f[sel], y[sel]
    base = float(np.percentile(fy, 10))
    amp = float(np.interp(f0, fx, fy) - base)
    w = max(width_ghz, 2 * step)
    specs = [
        ParamSpec("center", f0, fx[0], fx[-1]),
        ParamSpec("amplitude", max(amp, 1e-6), 0.0),
        ParamSpec("sigma_g", w / 4, 0.0, 10.0),
        ParamSpec("gamma_l", w / 4, 0.0, 10.0),
        ParamSpec("baseline", base),
    ]
    res = fit_least_squares(_voigt_baseline, specs, fx, fy, name="voigt", max_iter=MAX_ITER)
    vals = res.values
    if not np.all(np.isfinite(vals)):
        raise FitError("non-finite parameters")
    return res


def detect_ple_peaks(spectrum: PleSpectrum) -> list[PlePeak]:
    """Find, fit and filter the peaks of one PLE scan.

    Candidates are local maxima of the 5-point median-filtered trace whose
    prominence exceeds three times the robust noise. Each is fitted with a
    Voigt profile plus baseline on a local window; peaks with FWHM outside
    (50, 3000) MHz or amplitude below 0.03 kHz are discarded, and of peaks
    closer than 2 GHz only the brightest is kept. A fitted amplitude below
    the prominence threshold or below three times its own standard error
    also rejects the candidate. Failed fits are
    logged and skipped.
    """
    f, y = spectrum.frequency_ghz, spectrum.rate_khz
    if f.size < 10 or f[-1] - f[0] < 20.0:
        raise ValueError("spectrum must cover at least 20 GHz")
    step = float(np.median(np.diff(f)))
    smooth = medfilt(y, 5)
    noise = robust_noise(y)
    prominence = max(PROMINENCE_NOISE_FACTOR * noise, 1e-9)
    idx, props = find_peaks(smooth, prominence=prominence, width=1)
    found = []
    for i, width_pts in zip(idx, props["widths"]):
        f0 = float(f[i])
        if width_pts * step < 0.5e-3 * MIN_FWHM_MHZ:
            # far narrower than any admissible line: a noise spike
            continue
        try:
            res = _fit_candidate(f, y, f0, float(width_pts) * step, step)
        except (FitError, ValueError, np.linalg.LinAlgError) as exc:
            log.info("pillar %s: candidate at %.3f GHz dropped (%s)", spectrum.pillar_id, f0, exc)
            continue
        sg, gl = res.value("sigma_g"), res.value("gamma_l")
        if sg <= 0 and gl <= 0:
            continue
        peak = PlePeak(
            center_ghz=res.value("center"),
            amplitude_khz=res.value("amplitude"),
            fwhm_mhz=1e3 * voigt_fwhm(sg, gl),
            sigma_g_mhz=1e3 * sg,
            gamma_l_mhz=1e3 * gl,
            sigmas={"center_ghz": res.sigma("center"), "amplitude_khz": res.sigma("amplitude"),
                    "sigma_g_mhz": 1e3 * res.sigma("sigma_g"),
                    "gamma_l_mhz": 1e3 * res.sigma("gamma_l")},
        )
        significant = (peak.amplitude_khz >= prominence
                       and peak.amplitude_khz >= MIN_AMPLITUDE_SIGNIFICANCE * res.sigma("amplitude"))
        if not peak.satisfies_constraints() or not significant:
            log.debug("pillar %s: peak at %.3f GHz fails constraints", spectrum.pillar_id, peak.center_ghz)
            continue
        found.append(peak)
    kept: list[PlePeak] = []
    for p in sorted(found, key=lambda p: -p.amplitude_khz):
        if all(abs(p.center_ghz - q.center_ghz) > MIN_SEPARATION_GHZ for q in kept):
            kept.append(p)
    return sorted(kept, key=lambda p: p.center_ghz)


def ple_trace(f, peaks, background=0.0):
    """Noiseless rate for Voigt peaks given as ``(center_ghz, amplitude_khz, sigma_g_ghz, gamma_l_ghz)``."""
    f = np.asarray(f, dtype=float)
    out = np.full_like(f, background)
    for c, a, sg, gl in peaks:
        out += voigt_profile(f, sg, gl, a, c)
    return out


def simulate_pillar(pillar_id: str, n_peaks: int, rng, *, span_ghz=30.0, step_ghz=0.02,
                    noise_khz=0.02, background_khz=0.05, amplitude_range=(0.2, 2.0),
                    fwhm_range_mhz=(150.0, 1000.0), min_separation_ghz=2.5, center_fwhm_ghz=None):
    """Synthetic PLE scan with ``n_peaks`` well-separated Voigt peaks.

    Returns ``(spectrum, truth)`` where ``truth`` lists ``(center, amplitude,
    sigma_g, gamma_l)`` in GHz/kHz. Centers are uniform inside the scan (or
    Gaussian with FWHM ``center_fwhm_ghz``), at least ``min_separation_ghz``
    apart; the Lorentzian FWHM of each peak is half its Voigt FWHM.
    """
    f = np.arange(-span_ghz, span_ghz + step_ghz / 2, step_ghz)
    centers: list[float] = []
    while len(centers) < n_peaks:
        if center_fwhm_ghz:
            c = rng.normal(0.0, center_fwhm_ghz / (2 * math.sqrt(2 * math.log(2))))
        else:
            c = rng.uniform(-span_ghz + 3, span_ghz - 3)
        if abs(c) < span_ghz - 3 and all(abs(c - o) >= min_separation_ghz for o in centers):
            centers.append(float(c))
    truth = []
    for c in centers:
        amp = rng.uniform(*amplitude_range)
        fwhm = rng.uniform(*fwhm_range_mhz) * 1e-3
        # split the width so that the Voigt FWHM equals ``fwhm``
        gl = 0.25 * fwhm
        fg = (fwhm - 0.5346 * 2 * gl) ** 2 - 0.2166 * (2 * gl) ** 2
        sg = math.sqrt(max(fg, 0.0)) / (2 * math.sqrt(2 * math.log(2)))
        truth.append((c, amp, sg, gl))
    rate = ple_trace(f, truth, background_khz) + rng.normal(0.0, noise_khz, f.size)
    return PleSpectrum(pillar_id, f, np.clip(rate, 0.0, None)), truth


def simulate_cohort(n_pillars: int, seed: int = 0, mean_emitters: float = 0.8, label: str = "pillar",
                    **kwargs):
    """Pillars with a Poisson number of emitters (capped at 3) each."""
    spectra, truths = [], []
    for k in range(n_pillars):
        rng = substream(seed, "ple", k)
        n = min(int(rng.poisson(mean_emitters)), 3)
        spec, truth = simulate_pillar(f"{label}{k:04d}", n, rng, **kwargs)
        spectra.append(spec)
        truths.append(truth)
    return spectra, truths
