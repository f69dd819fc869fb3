"""Acceptance criteria 1-12, one test each.

Every test prints ``PASS``/``FAIL`` with the measured numbers; the same lines
are repeated in pytest's terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import solve_ivp

from conftest import ACCEPTANCE_LINES
from v2lab.optim import numeric_jacobian
from v2lab.photophysics import (
    EmitterModel,
    FrequencyPrior,
    fit_checkprobe_linewidth,
    fit_spectral_diffusion,
    g2_zero,
    heralded_spectral_density,
    lorentzian_response,
    mixed_g2_zero,
    postselect_probe_spectrum,
    simulate_check_probe,
    simulate_diffusion_records,
    simulate_g2,
)
from v2lab.rng import substream
from v2lab.spin import (
    MwSequence,
    SpinModel,
    desr_fit,
    normalize_readout,
    normalized_readout,
    power_law,
    rabi_chevron,
    ramsey_fit,
    run_spin_sequence,
    standard_sequence,
    stretched_decay,
    t2_power_law_fit,
)
from v2lab.survey import (
    DamageTable,
    PlMap,
    amorphization_fit,
    detect_ple_peaks,
    exceedance_curve,
    occurrence_stats,
    rescale_pl_maps,
    simulate_cohort,
)


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# --- 1 -------------------------------------------------------------------------------


def test_criterion_01_density_matches_monte_carlo():
    start = time.perf_counter()
    emitter = EmitterModel(39.0, 7.42)
    half = 200.0
    edges = np.linspace(-half, half, 41)
    fine = np.linspace(-half, half, 40001)
    worst_z, worst_p = 0.0, 1.0
    for t in (1, 5, 10):
        rng = substream(1, "acceptance-density", t)
        f = rng.uniform(-half, half, 1_000_000)
        kept = f[rng.poisson(lorentzian_response(f, 39.0, 7.42)) >= t]
        counts, _ = np.histogram(kept, edges)
        dens = heralded_spectral_density(fine, t, emitter, warn=False)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))])
        expected = kept.size * np.diff(np.interp(edges, fine, cdf))
        use = expected >= 5
        z = (counts[use] - expected[use]) / np.sqrt(expected[use])
        chi2 = float(np.sum(z ** 2))
        p = float(stats.chi2.sf(chi2, int(use.sum()) - 1))
        worst_z, worst_p = max(worst_z, float(np.abs(z).max())), min(worst_p, p)
    elapsed = time.perf_counter() - start
    verdict(1, "heralded density vs 1e6 Monte Carlo draws",
            worst_z < 4 and worst_p > 0.01 and elapsed < 10,
            f"max|z|={worst_z:.2f}, min p={worst_p:.3f}, {elapsed:.1f} s")


# --- 2 -------------------------------------------------------------------------------


def test_criterion_02_linewidth_recovery():
    start = time.perf_counter()
    prior = FrequencyPrior("uniform", 0.0, 200.0)
    rec = simulate_check_probe(EmitterModel(39.0, 7.42), 0.0, 100_000, prior, seed=2,
                               probe_detunings=np.linspace(-150, 150, 41))
    sweep = {t: postselect_probe_spectrum(rec, t) for t in range(1, 18)}
    res = fit_checkprobe_linewidth(sweep, 26.0, support=prior.support)
    g, c0 = res.value("gamma"), res.value("c0")
    elapsed = time.perf_counter() - start
    verdict(2, "threshold-swept linewidth fit",
            abs(g / 39.0 - 1) < 0.05 and abs(c0 / 7.42 - 1) < 0.05 and elapsed < 30,
            f"gamma={g:.2f} MHz, c0={c0:.3f}, {elapsed:.1f} s")


# --- 3 -------------------------------------------------------------------------------


def test_criterion_03_diffusion_recovery():
    start = time.perf_counter()
    pos = np.logspace(-2, math.log10(50), 15)
    delays = np.concatenate([-pos[::-1], [0.0], pos])
    worst = {"gamma_d": 0.0, "gamma_i": 0.0}
    for ratio in (0.1, 0.3, 1.0, 3.0, 10.0):
        for seed in range(20):
            rec = simulate_diffusion_records(delays, 5000, ratio=ratio, gamma_i=0.2, c0=10.0, seed=seed)
            res = fit_spectral_diffusion(rec, 1, gamma_assumed=39.0)
            worst["gamma_d"] = max(worst["gamma_d"], abs(res.value("gamma_d") / (39.0 * ratio) - 1))
            worst["gamma_i"] = max(worst["gamma_i"], abs(res.value("gamma_i") / 0.2 - 1))
    elapsed = time.perf_counter() - start
    verdict(3, "no-recapture fits over gamma_d/gamma in [0.1, 10] /ms, 20 seeds each",
            max(worst.values()) < 0.10 and elapsed < 20,
            f"max rel err gamma_d={worst['gamma_d']:.3f}, gamma_i={worst['gamma_i']:.3f}, {elapsed:.1f} s")


# --- 4 -------------------------------------------------------------------------------


def test_criterion_04_power_law():
    n = np.array([2, 4, 8, 16])
    rng = substream(4, "acceptance-power-law")
    t2 = power_law(n, 0.46, 0.73) * (1 + rng.normal(0, 0.05, n.size))
    res = t2_power_law_fit(n, t2, 0.05 * t2)
    alpha, beta = res.value("alpha"), res.value("beta")
    at16 = power_law(16, beta, alpha)
    # delta-method sigma of the fitted T2(16); parameter order is (beta, alpha)
    grad = np.array([at16 / beta, at16 * math.log(16)])
    at16_sigma = float(np.sqrt(grad @ res.covariance @ grad))
    generator16 = power_law(16, 0.46, 0.73)
    ok = (abs(alpha - 0.73) <= 0.08 and abs(beta - 0.46) <= 0.08
          and round(generator16, 2) == 3.48 and abs(generator16 - 3.6) <= 0.3
          and abs(at16 - generator16) <= 2 * at16_sigma)
    verdict(4, "T2 power law from four noisy DD points", ok,
            f"alpha={alpha:.3f}, beta={beta:.3f} ms, T2(16): law {generator16:.2f} ms, "
            f"fit {at16:.2f}+-{at16_sigma:.2f} ms")


# --- 5 -------------------------------------------------------------------------------


def test_criterion_05_ramsey_desr_consistency():
    emitter = EmitterModel(39.0, 10.0)
    fast = SpinModel(rabi_mhz=20.0, f_hf_mhz=2.1, t2star_us=0.9)
    ramsey = MwSequence("ramsey", fast.f0_mhz - 2.0, 20.0, np.linspace(0, 3, 121).tolist())
    nr = normalize_readout(run_spin_sequence(standard_sequence(ramsey), fast, emitter, 2000, seed=0), 1)
    r = ramsey_fit(nr.sweep, nr.r, nr.sigma)
    # a weak drive keeps power broadening of the DESR lines small
    slow = SpinModel(rabi_mhz=0.1, f_hf_mhz=2.1, t2star_us=0.9)
    desr = MwSequence("pi_pulse", 0.0, 0.1, np.linspace(179.5, 184.1, 93).tolist())
    nd = normalize_readout(run_spin_sequence(standard_sequence(desr), slow, emitter, 2000, seed=0), 1)
    d = desr_fit(nd.sweep, nd.r, nd.sigma)
    fr, sr = r.value("f_hf"), r.sigma("f_hf")
    fd, sd = d.extras["f_hf"], d.extras["f_hf_sigma"]
    z = abs(fr - fd) / math.hypot(sr, sd)
    verdict(5, "hyperfine splitting from Ramsey vs DESR pipelines", z < 2 and d.extras["resolved"],
            f"Ramsey {fr:.3f}+-{sr:.3f} MHz, DESR {fd:.3f}+-{sd:.3f} MHz, {z:.2f} sigma")


# --- 6 -------------------------------------------------------------------------------


def test_criterion_06_error_propagation():
    rng = substream(6, "acceptance-readout")
    worst = 0.0
    for c in (2.8, 6.0, 9.2):  # R = 0.1, 0.5, 0.9 for A = 10, B = 2
        a = rng.normal(10.0, 0.3, 1_000_000)
        b = rng.normal(2.0, 0.2, 1_000_000)
        cc = rng.normal(c, 0.25, 1_000_000)
        r, sigma = normalized_readout(10.0, 2.0, c, 0.3, 0.2, 0.25)
        mc = float(np.std((cc - b) / (a - b)))
        worst = max(worst, abs(sigma / mc - 1))
    verdict(6, "closed-form sigma_R vs 1e6-sample Monte Carlo at R = 0.1/0.5/0.9", worst < 0.02,
            f"max rel diff {worst:.4f}")


# --- 7 -------------------------------------------------------------------------------


def test_criterion_07_g2_mixing():
    details, ok = [], True
    for p in (0.0, 0.5, 0.908, 1.0):
        ch, t = simulate_g2(p, 0.01, 1e9, seed=1)
        g, s = g2_zero(ch, t, 0.02, duration=1e9)
        z = abs(g - (1 - p * p)) / s
        ok &= z < 3
        details.append(f"p={p}: {g:.3f}+-{s:.3f} ({z:.1f} sigma)")
    # 1 - 0.908^2 = 0.1755, the quoted 0.175 up to rounding
    ok &= abs(mixed_g2_zero(0.908) - 0.175) < 1e-3
    verdict(7, "g2(0) = 1 - p^2", ok, "; ".join(details))


# --- 8 -------------------------------------------------------------------------------


def test_criterion_08_peak_survey():
    spectra, truths = simulate_cohort(100, seed=8, mean_emitters=1.5)
    tp = fp = n_true = 0
    found, truth_amps = {}, {}
    for spec, truth in zip(spectra, truths):
        peaks = detect_ple_peaks(spec)
        found[spec.pillar_id] = peaks
        truth_amps[spec.pillar_id] = [a for _, a, _, _ in truth]
        n_true += len(truth)
        unmatched = list(truth)
        for p in peaks:
            hit = [t for t in unmatched if abs(t[0] - p.center_ghz) < 0.1]
            if hit:
                unmatched.remove(hit[0])
                tp += 1
            else:
                fp += 1
    precision = tp / max(tp + fp, 1)
    recall = tp / max(n_true, 1)
    hist_ok = all(occurrence_stats(found, th).histogram == occurrence_stats(truth_amps, th).histogram
                  for th in (0.0, 0.1))
    thresholds = np.sort(substream(8, "acceptance-thresholds").uniform(0, 2.5, 1000))
    mono = bool(np.all(np.diff(exceedance_curve(found, thresholds)) <= 0))
    verdict(8, "peak survey on 100 synthetic pillars",
            precision == 1.0 and recall >= 0.98 and hist_ok and mono,
            f"precision={precision:.3f}, recall={recall:.3f} of {n_true} peaks, "
            f"histograms {'match' if hist_ok else 'differ'}, exceedance {'monotone' if mono else 'NOT monotone'}")


# --- 9 -------------------------------------------------------------------------------


def test_criterion_09_rabi_oracle():
    omega, f_hf = 2.0, 2.19
    times = np.linspace(0, 5, 50)
    detunings = np.linspace(-10, 10, 50)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    worst = 0.0
    for d in detunings:
        oracle = np.zeros(times.size)
        for s in (0.5, -0.5):
            h = math.pi * ((d + s * f_hf) * sz + omega * sx)
            sol = solve_ivp(lambda _, psi, h=h: -1j * (h @ psi), (0.0, times[-1]),
                            np.array([1, 0], dtype=complex), t_eval=times, method="DOP853",
                            rtol=1e-12, atol=1e-13)
            oracle += 0.5 * np.abs(sol.y[1]) ** 2
        worst = max(worst, float(np.max(np.abs(rabi_chevron(times, d, omega, f_hf) - oracle))))
    verdict(9, "Rabi chevron vs integrated two-level dynamics on a 50x50 grid", worst < 1e-6,
            f"max abs err {worst:.2e}")


# --- 10 ------------------------------------------------------------------------------


def test_criterion_10_map_rescaling():
    rng = substream(10, "acceptance-maps")
    worst = 0.0
    for _ in range(200):
        shape = (int(rng.integers(3, 20)), int(rng.integers(3, 20)))
        scale = 10 ** rng.uniform(-3, 4, 2)
        before = PlMap(scale[0] * rng.uniform(0.1, 2, shape), np.arange(shape[1]), np.arange(shape[0]), [0, 1])
        after = PlMap(scale[1] * rng.uniform(0.1, 2, shape), np.arange(shape[1]), np.arange(shape[0]), [0, 1])
        _, _, bb, ba = rescale_pl_maps(before, after)
        worst = max(worst, abs(bb * ba - 1))
    ref = PlMap(np.ones((2, 2)), [0, 1], [0, 1], [0])
    _, _, bb, ba = rescale_pl_maps(ref, PlMap(np.full((2, 2), 1.524 ** 2), [0, 1], [0, 1], [0]))
    ok = worst < 1e-12 and round(bb, 3) == 1.524 and round(ba, 3) == 0.656
    verdict(10, "beta_before * beta_after = 1 and the reference pair", ok,
            f"max |product - 1| = {worst:.1e}, pair ({bb:.3f}, {ba:.3f})")


# --- 11 ------------------------------------------------------------------------------


def test_criterion_11_gradient_check():
    x = np.linspace(-3, 3, 61)
    t = np.linspace(0.05, 3, 40)

    def lor(p):
        c, a, g = p
        return a / (1 + ((x - c) / g) ** 2)

    def lor_jac(p):
        c, a, g = p
        u = (x - c) / g
        den = 1 + u ** 2
        return np.column_stack([2 * a * u / (g * den ** 2), 1 / den, 2 * a * u ** 2 / (g * den ** 2)])

    def gauss(p):
        c, a, s = p
        return a * np.exp(-0.5 * ((x - c) / s) ** 2)

    def gauss_jac(p):
        c, a, s = p
        e = np.exp(-0.5 * ((x - c) / s) ** 2)
        return np.column_stack([a * e * (x - c) / s ** 2, e, a * e * (x - c) ** 2 / s ** 3])

    def stretched(p):
        return stretched_decay(t, *p)

    def stretched_jac(p):
        b, a, t2, n = p
        u = (t / t2) ** n
        e = np.exp(-u)
        return np.column_stack([np.ones_like(t), e, a * e * u * n / t2, -a * e * u * np.log(t / t2)])

    worst = 0.0
    for model, jac, p in ((lor, lor_jac, [0.3, 1.7, 0.8]), (gauss, gauss_jac, [-0.2, 2.5, 0.9]),
                          (stretched, stretched_jac, [0.1, 0.8, 0.49, 2.0])):
        num = numeric_jacobian(model, p)
        ana = jac(np.asarray(p))
        rel = np.max(np.abs(num - ana)) / np.max(np.abs(ana))
        worst = max(worst, float(rel))
    verdict(11, "numeric vs analytic Jacobians", worst < 1e-5, f"max rel err {worst:.1e}")


# --- 12 ------------------------------------------------------------------------------


def test_criterion_12_amorphization():
    pillar = amorphization_fit(DamageTable.from_percentages([0.24, 0.30, 0.34], [0, 46, 100])).value("e50")
    bulk = amorphization_fit(DamageTable.from_percentages([0.20, 0.38, 0.40], [0, 80, 100])).value("e50")
    verdict(12, "logistic damage midpoints", 0.28 <= pillar <= 0.32 and 0.32 <= bulk <= 0.40,
            f"pillar {pillar:.3f} uJ, bulk {bulk:.3f} uJ")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
