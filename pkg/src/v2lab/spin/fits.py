"""Least-squares fits of the spin-coherence models."""

from __future__ import annotations

import itertools
import logging
import math

import numpy as np
from scipy.signal import find_peaks

from ..optim import FitError, FitResult, ParamSpec, fit_least_squares
from .models import desr_lines, power_law, rabi_chevron, ramsey_model, stretched_decay, t2star_from_fwhm

log = logging.getLogger(__name__)

# nonlinear fits run from this many of the best-ranked Ramsey starts
N_POLISHED_STARTS = 4
# amplitude significance (in sigma) for a DESR doublet to count as resolved
RESOLVED_SIGNIFICANCE = 5.0


def _prepare(x, y, sigma):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y differ in shape")
    if sigma is not None:
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), x.shape)
        if np.any(sigma <= 0):
            raise ValueError("sigmas must be positive")
    order = np.argsort(x, kind="stable")
    return x[order], y[order], None if sigma is None else sigma[order]


def _best(candidates):
    ok = [c for c in candidates if c is not None]
    if not ok:
        raise FitError("all starting points failed")
    return min(ok, key=lambda r: (not r.converged, r.chi2_reduced))


def _try_fit(*args, **kwargs):
    try:
        return fit_least_squares(*args, **kwargs)
    except FitError as exc:
        log.debug("start rejected: %s", exc)
        return None


def rabi_fit(t, r, sigma=None, f_hf: float = 0.0) -> FitResult:
    """``R = b + a * chevron(t, detuning, omega, f_hf)`` for a duration sweep (us, MHz).

    The hyperfine splitting is held fixed; the drive detuning is constrained
    to be non-negative because the chevron is even in it.
    """
    x, y, s = _prepare(t, r, sigma)
    if x.size < 6:
        raise ValueError("rabi_fit needs at least 6 durations")
    peaks, nyq = _spectrum_peaks(x, y, 3)
    results = []
    for w in peaks or [1.0 / max(x[-1] - x[0], 1e-9)]:
        specs = [
            ParamSpec("b", float(y.min())),
            ParamSpec("a", float(np.ptp(y)) or 1.0),
            ParamSpec("omega", max(w, 1e-6), 1e-9, 2 * nyq),
            ParamSpec("detuning", 0.1 * w, 0.0, 2 * nyq),
        ]
        model = lambda tt, b, a, om, det: b + a * rabi_chevron(tt, det, om, f_hf)  # noqa: E731
        results.append(_try_fit(model, specs, x, y, s, name="rabi"))
    res = _best(results)
    res.extras["f_hf"] = f_hf
    res.extras["pi_time_us"] = 1.0 / (2.0 * res.value("omega"))
    return res


def desr_fit(freqs, r, sigma=None) -> FitResult:
    """Two Gaussian lines with a shared FWHM on a baseline.

    Reports ``f_hf = |c2 - c1|`` and the dephasing time implied by the shared
    width in ``extras``. When either amplitude is below five sigma the
    splitting is flagged ``"unresolved"``: the free second line always finds
    the largest noise bump, so a two-sigma test would pass on pure noise.
    """
    f, y, s = _prepare(freqs, r, sigma)
    if f.size < 10:
        raise ValueError("desr_fit needs at least 10 frequency points")
    span = float(f[-1] - f[0])
    step = float(np.median(np.diff(f)))
    base = float(np.percentile(y, 10))
    height = max(float(y.max() - base), 1e-12)
    peaks, props = find_peaks(y - base, prominence=0.2 * height)
    order = np.argsort(props["prominences"])[::-1]
    tops = [float(f[i]) for i in peaks[order][:3]] or [float(f[np.argmax(y)])]

    starts = []
    for w in (span / 20, span / 8, 4 * step):
        w = max(w, 2 * step)
        for c1, c2 in itertools.combinations(tops, 2):
            starts.append((min(c1, c2), max(c1, c2), w))
        starts.append((tops[0] - w / 2, tops[0] + w / 2, w))

    results = []
    for c1, c2, w in starts:
        specs = [
            ParamSpec("b", base),
            ParamSpec("a1", height, 0.0),
            ParamSpec("c1", c1, f[0], f[-1]),
            ParamSpec("a2", height, 0.0),
            ParamSpec("c2", c2, f[0], f[-1]),
            ParamSpec("fwhm", w, step / 10, 2 * span),
        ]
        results.append(_try_fit(desr_lines, specs, f, y, s, name="desr"))
    res = _best(results)

    i1, i2 = res.names.index("c1"), res.names.index("c2")
    cov = res.covariance
    var = cov[i1, i1] + cov[i2, i2] - 2 * cov[i1, i2]
    f_hf = abs(res.value("c2") - res.value("c1"))
    fwhm, fwhm_s = res.params["fwhm"]
    t2s = t2star_from_fwhm(fwhm)
    res.extras.update(
        f_hf=f_hf,
        f_hf_sigma=math.sqrt(var) if np.isfinite(var) and var >= 0 else math.inf,
        t2star=t2s,
        t2star_sigma=t2s * fwhm_s / fwhm,
    )
    resolved = all(res.value(a) > RESOLVED_SIGNIFICANCE * res.sigma(a) for a in ("a1", "a2"))
    res.extras["resolved"] = resolved
    if not resolved:
        res.warnings.append("unresolved")
    return res


def _spectrum_peaks(tau, y, n_peaks):
    """Frequencies of the strongest local maxima of the residual periodogram."""
    dt = float(np.median(np.diff(tau)))
    nyq = 0.5 / dt
    span = float(tau[-1] - tau[0])
    grid = np.linspace(0.0, nyq, max(int(8 * span * nyq), 64) + 1)
    z = y - y.mean()
    power = np.abs(np.exp(-2j * np.pi * np.outer(grid, tau)) @ z) ** 2
    idx, _ = find_peaks(power)
    idx = idx[np.argsort(power[idx])[::-1]][:n_peaks]
    return [float(grid[i]) for i in idx], nyq


def _linear_amplitudes(tau, y, fa, fb, t2s):
    """Best ``b, A_i, phi_i`` for fixed frequencies and envelope."""
    env = np.exp(-(tau / t2s) ** 2)
    cols = [np.ones_like(tau)]
    for f in (fa, fb):
        cols += [env * np.cos(2 * np.pi * f * tau), -env * np.sin(2 * np.pi * f * tau)]
    m = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(m, y, rcond=None)
    b = coef[0]
    a0, phi0 = math.hypot(coef[1], coef[2]), math.atan2(coef[2], coef[1])
    a1, phi1 = math.hypot(coef[3], coef[4]), math.atan2(coef[4], coef[3])
    return b, a0, phi0, a1, phi1


def _canonical_phases(res: FitResult, n_components: int):
    """Make amplitudes non-negative and phases lie in (-pi, pi]."""
    for k in range(n_components):
        a, p = f"a{k}", f"phi{k}"
        (av, asg), (pv, psg) = res.params[a], res.params[p]
        if av < 0:
            av, pv = -av, pv + math.pi
        pv = math.atan2(math.sin(pv), math.cos(pv))
        res.params[a], res.params[p] = (av, asg), (pv, psg)


def ramsey_fit(tau, r, sigma=None, n_components: int = 2) -> FitResult:
    """Gaussian-damped two-frequency oscillation about a centre frequency.

    Starting points pair the strongest periodogram peaks over a few envelope
    guesses, with amplitudes and phases solved linearly; only the starts
    with the lowest linear cost are polished by the nonlinear fit.
    ``tau`` in us, frequencies in MHz. Component 0 oscillates at
    ``f_c + f_hf/2``. A fitted component within 5 % of the Nyquist
    frequency of the sampling is reported with an ``"aliasing"`` warning.
    """
    if n_components not in (1, 2):
        raise ValueError("n_components must be 1 or 2")
    t, y, s = _prepare(tau, r, sigma)
    if t.size < 4 * n_components + 2:
        raise ValueError("too few delays for the Ramsey model")
    span = float(t[-1] - t[0])
    peaks, nyq = _spectrum_peaks(t, y, 4)
    if not peaks:
        peaks = [1.0 / span]

    pairs = []
    if n_components == 1:
        pairs = [(f, f) for f in peaks[:2]]
    else:
        pairs = [(max(a, b), min(a, b)) for a, b in itertools.combinations(peaks, 2)]
        pairs += [(peaks[0], peaks[0])]

    # rank every (frequency pair, envelope) start by its linear least-squares
    # cost and polish only the most promising ones
    starts = []
    for fa, fb in pairs:
        for t2s in (span / 8, span / 4, span / 2, span):
            if n_components == 1:
                b, a0, phi0, _, _ = _linear_amplitudes(t, y, fa, fa, t2s)
                # with identical columns lstsq splits the amplitude evenly
                lin = (b, 2 * a0, phi0, 0.0, 0.0)
                fc, fhf = fa, 0.0
            else:
                lin = _linear_amplitudes(t, y, fa, fb, t2s)
                fc, fhf = 0.5 * (fa + fb), fa - fb
            resid = y - ramsey_model(t, *lin, fc, fhf, t2s)
            if s is not None:
                resid = resid / s
            starts.append((float(resid @ resid), lin, fc, fhf, t2s))
    starts.sort(key=lambda item: item[0])

    single = n_components == 1
    results = []
    for _, (b, a0, phi0, a1, phi1), fc, fhf, t2s in starts[:N_POLISHED_STARTS]:
        specs = [
            ParamSpec("b", b),
            ParamSpec("a0", a0),
            ParamSpec("phi0", phi0),
            ParamSpec("a1", a1, frozen=single),
            ParamSpec("phi1", phi1, frozen=single),
            ParamSpec("f_c", min(fc, nyq), 0.0, nyq),
            ParamSpec("f_hf", min(fhf, 2 * nyq), 0.0, 2 * nyq, frozen=single),
            ParamSpec("t2star", t2s, span / 1e3, 100 * span),
        ]
        results.append(_try_fit(ramsey_model, specs, t, y, s, name="ramsey"))
    res = _best(results)
    _canonical_phases(res, n_components)
    top = res.value("f_c") + 0.5 * res.value("f_hf")
    res.extras["nyquist"] = nyq
    if top > 0.95 * nyq:
        res.warnings.append("aliasing")
    return res


def stretched_decay_fit(t, r, sigma=None) -> FitResult:
    """``R = b + A exp(-(t/T2)^n)`` with the exponent free.

    When the fitted curve changes by less than 10 % of ``|A|`` over the
    sampled span, or ``A`` is within two sigma of zero, there is no decay to
    constrain the fit; the result then has ``converged=False`` and a
    ``"no_decay"`` warning.
    """
    x, y, s = _prepare(t, r, sigma)
    if x.size < 5:
        raise ValueError("stretched_decay_fit needs at least 5 points")
    if x[0] <= 0:
        raise ValueError("total evolution times must be positive")
    b0 = float(y[-max(1, x.size // 8):].mean())
    a0 = float(y[: max(1, x.size // 8)].mean()) - b0
    if a0 == 0:
        a0 = float(np.ptp(y)) or 1.0
    frac = (y - b0) / a0
    below = np.nonzero(frac < math.exp(-1))[0]
    t2_0 = float(x[below[0]]) if below.size else float(x[-1])
    results = []
    for n0 in (1.0, 2.0, 3.0):
        for scale in (1.0, 0.5, 2.0):
            specs = [
                ParamSpec("b", b0),
                ParamSpec("a", a0),
                ParamSpec("t2", t2_0 * scale, x[0] / 100, 100 * x[-1]),
                ParamSpec("n", n0, 0.1, 10.0),
            ]
            results.append(_try_fit(stretched_decay, specs, x, y, s, name="stretched_decay"))
    res = _best(results)
    t2, n = res.value("t2"), res.value("n")
    change = abs(math.exp(-((x[0] / t2) ** n)) - math.exp(-((x[-1] / t2) ** n)))
    a, a_sigma = res.params["a"]
    if change < 0.1 or not abs(a) > 2 * a_sigma:
        res.converged = False
        res.warnings.append("no_decay")
    return res


def _log_power_law(n, beta, alpha):
    return np.log(beta) + alpha * np.log(n)


def t2_power_law_fit(n_pulses, t2, t2_sigma=None, space: str = "log") -> FitResult:
    """``T2 = beta * N**alpha`` over the decoupling data (``N >= 2``).

    ``space="log"`` (default) fits ``ln T2`` with uncertainties ``sigma/T2``;
    ``space="linear"`` fits ``T2`` directly. Points with ``N < 2`` (the Hahn
    echo) are dropped with a ``"dropped_hahn"`` warning.
    """
    n = np.asarray(n_pulses, dtype=float)
    y = np.asarray(t2, dtype=float)
    if n.shape != y.shape:
        raise ValueError("N and T2 differ in shape")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("T2 values must be positive and finite")
    s = None if t2_sigma is None else np.broadcast_to(np.asarray(t2_sigma, dtype=float), y.shape)
    keep = n >= 2
    warnings = [] if keep.all() else ["dropped_hahn"]
    n, y = n[keep], y[keep]
    s = None if s is None else s[keep]
    if np.unique(n).size < 3:
        raise ValueError("power-law fit needs at least 3 distinct N >= 2")
    alpha0, logb0 = np.polyfit(np.log(n), np.log(y), 1)
    specs = [ParamSpec("beta", math.exp(logb0), 0.0), ParamSpec("alpha", alpha0)]
    if space == "log":
        res = fit_least_squares(_log_power_law, specs, n, np.log(y), None if s is None else s / y,
                                name="t2_power_law")
    elif space == "linear":
        res = fit_least_squares(power_law, specs, n, y, s, name="t2_power_law")
    else:
        raise ValueError("space must be 'log' or 'linear'")
    res.extras["space"] = space
    res.warnings.extend(warnings)
    return res
