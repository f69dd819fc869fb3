"""Cohort statistics: occurrence, inhomogeneous spread, map rescaling, damage thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from ..optim import FitResult, ParamSpec, fit_least_squares

OCCURRENCE_BINS = ("0", "1", "2", "3+")
INHOMOGENEOUS_BIN_GHZ = 2.0
_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


# --- occurrence -----------------------------------------------------------

@dataclass
class OccurrenceStats:
    threshold_khz: float
    n_pillars: int
    histogram: dict
    fractions: dict

    def to_dict(self) -> dict:
        return {"threshold_khz": self.threshold_khz, "n_pillars": self.n_pillars,
                "histogram": dict(self.histogram), "fractions": dict(self.fractions)}


def _amplitudes(peaks):
    return np.array([getattr(p, "amplitude_khz", p) for p in peaks], dtype=float)


def occurrence_stats(peaks_by_pillar: dict, amplitude_threshold: float) -> OccurrenceStats:
    """Histogram of pillars by the number of peaks at or above the threshold (0, 1, 2, 3+).

    Peaks may be ``PlePeak`` objects or bare amplitudes in kHz.
    """
    if amplitude_threshold < 0:
        raise ValueError("threshold must be non-negative")
    hist = {k: 0 for k in OCCURRENCE_BINS}
    for peaks in peaks_by_pillar.values():
        n = int(np.sum(_amplitudes(peaks) >= amplitude_threshold))
        hist[OCCURRENCE_BINS[min(n, 3)]] += 1
    total = len(peaks_by_pillar)
    fractions = {k: (v / total if total else 0.0) for k, v in hist.items()}
    return OccurrenceStats(float(amplitude_threshold), total, hist, fractions)


def exceedance_curve(peaks_by_pillar: dict, thresholds) -> np.ndarray:
    """Mean number of peaks per pillar with amplitude at or above each threshold."""
    thresholds = np.asarray(thresholds, dtype=float)
    if not peaks_by_pillar:
        return np.zeros_like(thresholds)
    amps = np.sort(np.concatenate([_amplitudes(p) for p in peaks_by_pillar.values()] + [np.empty(0)]))
    above = amps.size - np.searchsorted(amps, thresholds, side="left")
    return above / len(peaks_by_pillar)


# --- inhomogeneous distribution --------------------------------------------

def _gaussian(x, amplitude, center, sigma):
    return amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2)


def inhomogeneous_fit(centers_ghz, bin_ghz: float = INHOMOGENEOUS_BIN_GHZ) -> FitResult:
    """Gaussian fit to the histogram of peak centers.

    Bins are aligned to multiples of ``bin_ghz`` with two empty bins of
    padding; when the sample FWHM is below four bins the bin width shrinks to
    a quarter of it so the shape stays resolved. The fit is unweighted, which
    makes it invariant to duplicating the sample. ``extras`` holds the FWHM
    and its sigma plus the histogram.
    """
    c = np.asarray(centers_ghz, dtype=float)
    if c.size < 10:
        raise ValueError("inhomogeneous_fit needs at least 10 centers")
    spread = float(np.std(c))
    if spread == 0.0 or not np.isfinite(spread):
        raise ValueError("all centers coincide; width undefined")
    width = min(bin_ghz, _FWHM_PER_SIGMA * spread / 4.0)
    lo = (math.floor(c.min() / width) - 2) * width
    hi = (math.ceil(c.max() / width) + 2) * width
    edges = np.arange(lo, hi + width / 2, width)
    counts, edges = np.histogram(c, bins=edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    specs = [
        ParamSpec("amplitude", float(counts.max()), 0.0),
        ParamSpec("center", float(np.mean(c)), float(edges[0]), float(edges[-1])),
        ParamSpec("sigma", spread, width / 100, 10 * (edges[-1] - edges[0])),
    ]
    res = fit_least_squares(_gaussian, specs, mids, counts.astype(float), name="inhomogeneous")
    sig, sig_s = res.params["sigma"]
    res.extras.update(fwhm_ghz=_FWHM_PER_SIGMA * sig, fwhm_sigma_ghz=_FWHM_PER_SIGMA * sig_s,
                      bin_ghz=width, bin_centers=mids.tolist(), counts=counts.tolist())
    return res


# --- PL map rescaling --------------------------------------------------------

@dataclass
class PlMap:
    """2D PL scan (kHz) on ``y_um`` x ``x_um`` with the rows of the reference bulk region."""

    counts: np.ndarray
    x_um: np.ndarray
    y_um: np.ndarray
    baseline_rows: list = field(default_factory=list)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        self.x_um = np.asarray(self.x_um, dtype=float)
        self.y_um = np.asarray(self.y_um, dtype=float)
        if self.counts.shape != (self.y_um.size, self.x_um.size):
            raise ValueError("counts shape must be (len(y), len(x))")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        self.baseline_rows = [int(r) for r in self.baseline_rows]

    def baseline_mean(self) -> float:
        if not self.baseline_rows:
            raise ValueError("no baseline rows selected")
        return float(self.counts[self.baseline_rows].mean())


def rescale_pl_maps(before: PlMap, after: PlMap):
    """Bring two scans to a common bulk baseline.

    With ``alpha = sqrt(mu_before * mu_after)`` each map is multiplied by
    ``beta = alpha / mu`` so both baseline means become ``alpha`` and
    ``beta_before * beta_after = 1``. Returns ``(before_scaled, after_scaled,
    beta_before, beta_after)``.
    """
    mu_b, mu_a = before.baseline_mean(), after.baseline_mean()
    if not (mu_b > 0 and mu_a > 0):
        raise ValueError("baseline means must be positive")
    alpha = math.sqrt(mu_b) * math.sqrt(mu_a)
    beta_b = math.sqrt(mu_a / mu_b)
    beta_a = 1.0 / beta_b
    scaled_b = PlMap(before.counts * beta_b, before.x_um, before.y_um, before.baseline_rows)
    scaled_a = PlMap(after.counts * beta_a, after.x_um, after.y_um, after.baseline_rows)
    assert math.isclose(mu_b * beta_b, alpha, rel_tol=1e-9)
    return scaled_b, scaled_a, beta_b, beta_a


# --- amorphization -------------------------------------------------------------

MAX_SLOPE = 1e4  # per uJ
UNRESOLVABLE_BELOW = 0.025
DETERMINISTIC_ABOVE = 0.975


@dataclass
class DamageTable:
    energy_uj: np.ndarray
    exposed: np.ndarray
    damaged: np.ndarray

    def __post_init__(self):
        self.energy_uj = np.asarray(self.energy_uj, dtype=float)
        self.exposed = np.asarray(self.exposed, dtype=np.int64)
        self.damaged = np.asarray(self.damaged, dtype=np.int64)
        if not (self.energy_uj.shape == self.exposed.shape == self.damaged.shape):
            raise ValueError("columns differ in length")
        if np.any(self.exposed <= 0) or np.any(self.damaged < 0) or np.any(self.damaged > self.exposed):
            raise ValueError("need 0 <= damaged <= exposed and exposed > 0")

    @classmethod
    def from_percentages(cls, energies, percents, exposed=100):
        exposed = np.broadcast_to(np.asarray(exposed), np.shape(energies))
        damaged = np.rint(np.asarray(percents, dtype=float) / 100.0 * exposed).astype(int)
        return cls(energies, exposed, damaged)


def damage_probability(energy, e50, slope):
    return expit(slope * (np.asarray(energy, dtype=float) - e50))


def regime_labels(prob) -> list[str]:
    out = []
    for p in np.atleast_1d(prob):
        if p < UNRESOLVABLE_BELOW:
            out.append("unresolvable")
        elif p > DETERMINISTIC_ABOVE:
            out.append("deterministic")
        else:
            out.append("probabilistic")
    return out


def _logistic_result(table, e50, slope, cov, converged, warnings, n_iter=0):
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None)) if np.all(np.isfinite(cov)) else [math.inf] * 2
    res = FitResult({"e50": (float(e50), float(sig[0])), "slope": (float(slope), float(sig[1]))},
                    np.asarray(cov, dtype=float), 0.0, int(table.energy_uj.size), n_iter, converged,
                    model="amorphization", warnings=list(warnings))
    prob = damage_probability(table.energy_uj, e50, slope) if np.isfinite(e50) else (
        np.zeros(table.energy_uj.size) if e50 > 0 else np.ones(table.energy_uj.size))
    res.extras.update(predicted=np.asarray(prob).tolist(), labels=regime_labels(prob),
                      separable="separable" in warnings)
    return res


def amorphization_fit(table: DamageTable) -> FitResult:
    """Binomial maximum-likelihood logistic fit of damage probability vs pulse energy.

    Parameters are the 50 % energy ``e50`` (uJ) and ``slope`` (1/uJ).
    Energies are labelled unresolvable (< 2.5 % predicted), probabilistic,
    or deterministic (> 97.5 %). Perfectly separated data put the midpoint
    halfway between the last undamaged and first fully damaged energy with
    the slope at its upper bound and a ``"separable"`` warning.
    """
    e, n, k = table.energy_uj, table.exposed, table.damaged
    if e.size < 3:
        raise ValueError("amorphization_fit needs at least 3 energies")
    frac = k / n
    order = np.argsort(e)
    inf_cov = np.full((2, 2), np.inf)
    if np.all(k == 0):
        return _logistic_result(table, math.inf, math.nan, inf_cov, True, ["no_damage"])
    if np.all(k == n):
        return _logistic_result(table, -math.inf, math.nan, inf_cov, True, ["all_damaged"])
    fs = frac[order]
    if np.all((fs == 0) | (fs == 1)) and np.all(np.diff(fs) >= 0):
        last0 = e[order][fs == 0].max()
        first1 = e[order][fs == 1].min()
        return _logistic_result(table, 0.5 * (last0 + first1), MAX_SLOPE, inf_cov, False, ["separable"])

    span = float(np.ptp(e))

    def nll(theta):
        e50, log_s = theta
        z = math.exp(log_s) * (e - e50)
        # log p = -log(1 + exp(-z)), log(1-p) = -log(1 + exp(z))
        return float(np.sum(k * np.logaddexp(0.0, -z) + (n - k) * np.logaddexp(0.0, z)))

    e50_0 = float(np.interp(0.5, np.maximum.accumulate(fs), e[order]))
    best = None
    for s0 in (4.0 / span, 20.0 / span, 100.0 / span):
        r = minimize(nll, [e50_0, math.log(s0)], method="L-BFGS-B",
                     bounds=[(e.min() - span, e.max() + span), (math.log(1e-3 / span), math.log(MAX_SLOPE))])
        if best is None or r.fun < best.fun:
            best = r
    e50, slope = best.x[0], math.exp(best.x[1])
    warnings = []
    if slope >= 0.99 * MAX_SLOPE:
        warnings.append("separable")
    p = damage_probability(e, e50, slope)
    w = n * p * (1 - p)
    grad = np.vstack([-slope * np.ones_like(e), e - e50])
    info = (grad * w) @ grad.T
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = inf_cov
    return _logistic_result(table, e50, slope, cov, bool(best.success) and not warnings, warnings,
                            int(best.nit))
