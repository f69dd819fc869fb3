import warnings

import numpy as np
import pytest

from v2lab.photophysics import (
    DensityTruncationWarning,
    EmitterModel,
    FrequencyPrior,
    InsufficientDataError,
    apparent_fwhm,
    checkprobe_spectrum,
    checkprobe_variance,
    fit_checkprobe_linewidth,
    heralded_spectral_density,
    lorentzian_response,
    poisson_tail,
    postselect_probe_spectrum,
    simulate_check_probe,
)

EMITTER = EmitterModel(gamma=39.0, c0=7.42)
GRID = np.linspace(-400, 400, 1601)


def test_density_normalized_for_all_thresholds():
    for t in range(1, 21):
        d = heralded_spectral_density(GRID, t, EMITTER, warn=False)
        assert np.all(d >= 0)
        assert np.trapezoid(d, GRID) == pytest.approx(1.0, abs=1e-6)
        assert GRID[np.argmax(d)] == pytest.approx(0.0)


def test_density_peak_follows_check_frequency():
    d = heralded_spectral_density(GRID, 5, EMITTER, f1=30.0)
    assert GRID[np.argmax(d)] == pytest.approx(30.0)


def test_density_narrows_with_threshold():
    widths = [apparent_fwhm(GRID, heralded_spectral_density(GRID, t, EMITTER, warn=False))
              for t in range(1, 18)]
    assert np.all(np.diff(widths) <= 1e-9)
    assert widths[-1] < widths[0]


def test_density_uniform_when_always_heralded():
    grid = np.linspace(-50, 50, 201)
    d = heralded_spectral_density(grid, 1, EmitterModel(39.0, 1e7), warn=False)
    np.testing.assert_allclose(d, 1.0 / 100.0, rtol=1e-6)


def test_zero_rate_cannot_herald():
    # the unnormalized density is the probability to reach the threshold
    assert poisson_tail(1, 0.0) == 0.0
    with pytest.raises(ValueError):
        heralded_spectral_density(GRID, 1, EmitterModel(39.0, 0.0, gamma_lifetime=26.0))


def test_truncation_warning_on_narrow_grid():
    narrow = np.linspace(-40, 40, 161)
    with pytest.warns(DensityTruncationWarning):
        heralded_spectral_density(narrow, 1, EMITTER)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        heralded_spectral_density(np.linspace(-3000, 3000, 6001), 10, EMITTER)


def test_density_rejects_bad_input():
    with pytest.raises(ValueError):
        heralded_spectral_density(GRID, 0, EMITTER)
    with pytest.raises(ValueError):
        heralded_spectral_density(GRID[::-1], 1, EMITTER)


def test_spectrum_dirac_limit_is_lorentzian():
    f = np.linspace(-150, 150, 61)
    fine = np.linspace(-60, 60, 24001)
    c = checkprobe_spectrum(f, 3000, 39.0, 7.42, grid=fine)
    np.testing.assert_allclose(c, lorentzian_response(f, 39.0, 7.42), rtol=2e-3)


def test_spectrum_broadened_and_bounded():
    f = np.linspace(-200, 200, 401)
    widths = []
    for t in (1, 3, 6, 10, 17):
        c = checkprobe_spectrum(f, t, 39.0, 7.42, support=(-200, 200))
        assert c.max() <= 7.42
        widths.append(apparent_fwhm(f, c))
    assert widths[0] > 39.0
    assert np.all(np.diff(widths) <= 1e-9)
    assert widths[-1] > 39.0


def test_simulator_zero_brightness():
    rec = simulate_check_probe(EmitterModel(39.0, 0.0, gamma_lifetime=26.0), 0.0, 500,
                               FrequencyPrior("uniform", 0.0, 200.0), seed=1)
    assert np.all(rec.check_counts == 0) and np.all(rec.probe_counts == 0)


def test_simulator_on_resonance_mean():
    rec = simulate_check_probe(EMITTER, 0.0, 200_000, FrequencyPrior("dirac", 0.0), seed=2)
    _, mean, n = postselect_probe_spectrum(rec, 1)
    sem = np.sqrt(7.42 / n[0])
    assert abs(mean[0] - 7.42) < 4 * sem


def test_simulator_is_reproducible():
    prior = FrequencyPrior("uniform", 0.0, 200.0)
    a = simulate_check_probe(EMITTER, 0.0, 10_000, prior, seed=5, probe_detunings=[-10, 0, 10])
    b = simulate_check_probe(EMITTER, 0.0, 10_000, prior, seed=5, probe_detunings=[-10, 0, 10])
    c = simulate_check_probe(EMITTER, 0.0, 10_000, prior, seed=6, probe_detunings=[-10, 0, 10])
    np.testing.assert_array_equal(a.probe_counts, b.probe_counts)
    assert not np.array_equal(a.probe_counts, c.probe_counts)


def test_monte_carlo_matches_analytic_spectrum():
    probes = np.linspace(-150, 150, 31)
    prior = FrequencyPrior("uniform", 0.0, 200.0)
    rec = simulate_check_probe(EMITTER, 0.0, 100_000, prior, seed=11, probe_detunings=probes)
    for t in (1, 4, 8):
        grid, mean, n = postselect_probe_spectrum(rec, t)
        ok = n >= 20
        model = checkprobe_spectrum(grid[ok], t, 39.0, 7.42, support=prior.support)
        var = checkprobe_variance(grid[ok], t, 39.0, 7.42, support=prior.support)
        z = (mean[ok] - model) / np.sqrt(var / n[ok])
        assert np.all(np.abs(z) < 4), (t, np.abs(z).max())


def _noiseless_sweep(gamma, c0, thresholds, support=(-200.0, 200.0)):
    # a fine quadrature grid keeps the generator's own discretization error below 1e-6
    f = np.linspace(-150, 150, 41)
    fine = np.linspace(support[0], support[1], 40001)
    return {t: (f, checkprobe_spectrum(f, t, gamma, c0, grid=fine)) for t in thresholds}


def test_fit_noiseless_recovers_generator():
    res = fit_checkprobe_linewidth(_noiseless_sweep(39.0, 7.42, range(1, 18)), 26.0, support=(-200, 200))
    assert res.value("gamma") == pytest.approx(39.0, rel=1e-6)
    assert res.value("c0") == pytest.approx(7.42, rel=1e-6)


def test_fit_high_threshold_only():
    res = fit_checkprobe_linewidth(_noiseless_sweep(39.0, 7.42, (40, 50, 60)), 26.0)
    assert res.value("gamma") == pytest.approx(39.0, rel=0.01)


def test_fit_reports_lifetime_ratio():
    res = fit_checkprobe_linewidth(_noiseless_sweep(57.5, 7.42, (1, 3, 6, 10)), 26.0)
    assert res.value("gamma") == pytest.approx(57.5, rel=1e-3)
    assert round(res.extras["ratio"], 2) == 2.21


def test_fit_needs_three_thresholds():
    with pytest.raises(InsufficientDataError):
        fit_checkprobe_linewidth(_noiseless_sweep(39.0, 7.42, (1, 2)), 26.0)


def test_fit_rejects_disjoint_grids():
    sweep = _noiseless_sweep(39.0, 7.42, (1, 2, 3))
    f, m = sweep[3]
    sweep[3] = (f + 1000.0, m)
    with pytest.raises(ValueError):
        fit_checkprobe_linewidth(sweep, 26.0)


def test_fit_on_simulated_data():
    probes = np.linspace(-150, 150, 41)
    prior = FrequencyPrior("uniform", 0.0, 200.0)
    rec = simulate_check_probe(EMITTER, 0.0, 100_000, prior, seed=7, probe_detunings=probes)
    sweep = {}
    for t in range(1, 18):
        grid, mean, n = postselect_probe_spectrum(rec, t)
        sweep[t] = (grid, mean, n)
    res = fit_checkprobe_linewidth(sweep, 26.0, support=prior.support)
    assert res.value("gamma") == pytest.approx(39.0, rel=0.05)
    assert res.value("c0") == pytest.approx(7.42, rel=0.05)
