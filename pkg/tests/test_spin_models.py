import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from v2lab.spin import (
    SpinModel,
    compose,
    desr_lines,
    free_evolution,
    power_law,
    rabi_chevron,
    ramsey_model,
    rotation,
    stretched_decay,
    t2star_from_fwhm,
    transfer_probability,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def hamiltonian(omega, detuning, phase_deg=0.0):
    """Rotating-frame Hamiltonian in rad/us for frequencies in MHz."""
    phi = math.radians(phase_deg)
    return math.pi * (detuning * SZ + omega * (math.cos(phi) * SX + math.sin(phi) * SY))


def expm_transfer(t, detuning, omega, f_hf):
    p = 0.0
    for s in (0.5, -0.5):
        u = expm(-1j * hamiltonian(omega, detuning + s * f_hf) * t)
        p += 0.5 * abs(u[1, 0]) ** 2
    return p


def ode_transfer(t, detuning, omega):
    h = hamiltonian(omega, detuning)
    sol = solve_ivp(lambda _, psi: -1j * (h @ psi), (0.0, t), np.array([1, 0], dtype=complex),
                    rtol=1e-11, atol=1e-12, method="DOP853")
    return abs(sol.y[1, -1]) ** 2


def test_pi_pulse_and_zero_time():
    assert rabi_chevron(1 / (2 * 3.0), 0.0, 3.0) == pytest.approx(1.0)
    assert rabi_chevron(0.0, 1.7, 3.0, 2.19) == 0.0


def test_chevron_rejects_nonpositive_drive():
    with pytest.raises(ValueError):
        rabi_chevron(1.0, 0.0, 0.0)


def test_chevron_matches_ode_integration():
    for t, d, om in [(0.37, 0.0, 2.0), (1.3, 3.1, 1.2), (4.2, -6.0, 9.5)]:
        assert rabi_chevron(t, d, om) == pytest.approx(ode_transfer(t, d, om), abs=1e-8)


def test_chevron_matches_propagator_with_hyperfine():
    rng = np.random.default_rng(0)
    for _ in range(50):
        t, d, om = rng.uniform(0, 5), rng.uniform(-10, 10), rng.uniform(0.1, 10)
        assert abs(rabi_chevron(t, d, om, 2.19) - expm_transfer(t, d, om, 2.19)) < 1e-10


def test_hyperfine_splits_ridge():
    # a weak drive has its maxima at the two nuclear-projection resonances
    d = np.linspace(-3, 3, 6001)
    p = rabi_chevron(1 / (2 * 0.1), d, 0.1, 2.19)
    left = d[d < 0][np.argmax(p[d < 0])]
    right = d[d > 0][np.argmax(p[d > 0])]
    assert left == pytest.approx(-1.095, abs=2e-3)
    assert right == pytest.approx(1.095, abs=2e-3)


@settings(max_examples=100, deadline=None)
@given(t=st.floats(0, 5), d=st.floats(-10, 10), om=st.floats(0.01, 10), fhf=st.floats(0, 5))
def test_chevron_bounded_and_even(t, d, om, fhf):
    p = rabi_chevron(t, d, om, fhf)
    assert 0.0 <= p <= 1.0 + 1e-12
    assert p == rabi_chevron(t, -d, om, fhf)


def test_rotation_matches_expm():
    for phase in (0.0, 90.0, 180.0, 37.0):
        a, b = rotation(1.7, 0.4, phase, 0.31)
        u = expm(-1j * hamiltonian(1.7, 0.4, phase) * 0.31)
        np.testing.assert_allclose([a, b], [u[0, 0], u[1, 0]], atol=1e-12)


def test_compose_order():
    first = rotation(1.0, 0.3, 0.0, 0.2)
    second = rotation(1.0, 0.3, 90.0, 0.5)
    a, b = compose(second, first)
    u = expm(-1j * hamiltonian(1.0, 0.3, 90.0) * 0.5) @ expm(-1j * hamiltonian(1.0, 0.3, 0.0) * 0.2)
    np.testing.assert_allclose([a, b], [u[0, 0], u[1, 0]], atol=1e-12)


def test_free_evolution_keeps_population():
    op = compose(free_evolution(2.0, 0.7), rotation(1.0, 0.0, 0.0, 0.5))
    assert transfer_probability(op) == pytest.approx(1.0)


def test_ramsey_at_zero_delay():
    b, a0, p0, a1, p1 = 0.2, 0.3, 0.4, 0.25, -1.1
    val = ramsey_model(0.0, b, a0, p0, a1, p1, 2.13, 2.08, 0.9)
    assert val == pytest.approx(b + a0 * math.cos(p0) + a1 * math.cos(p1))


def test_ramsey_components():
    tau = np.linspace(0, 3, 301)
    got = ramsey_model(tau, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 1.0, 1e9)
    np.testing.assert_allclose(got, np.cos(2 * np.pi * 2.5 * tau), atol=1e-12)


def test_stretched_decay_at_t2():
    for n in (0.7, 1.0, 2.0, 3.3):
        assert stretched_decay(0.49, 0.1, 0.8, 0.49, n) - 0.1 == pytest.approx(0.8 / math.e)


def test_power_law_anchors():
    assert power_law(1, 0.46, 0.73) == pytest.approx(0.46)
    assert power_law(16, 0.46, 0.73) == pytest.approx(3.48, abs=0.01)
    assert 3.3 <= power_law(16, 0.46, 0.73) <= 3.9


def test_t2star_formula():
    fwhm = 2 * math.sqrt(math.log(2)) / math.pi
    assert fwhm == pytest.approx(0.5301, abs=1e-4)
    assert t2star_from_fwhm(fwhm) == pytest.approx(1.0, rel=1e-15)


def test_desr_lines_peaks():
    f = np.array([180.7, 182.9])
    v = desr_lines(f, 0.1, 0.5, 180.7, 0.4, 182.9, 0.2)
    np.testing.assert_allclose(v, [0.6, 0.5], atol=1e-12)
    assert desr_lines(180.8, 0.0, 1.0, 180.7, 0.0, 182.9, 0.2) == pytest.approx(0.5)


def test_spin_model_validation():
    with pytest.raises(ValueError):
        SpinModel(rabi_mhz=0.0)
    with pytest.raises(ValueError):
        SpinModel(t2_alpha=1.6)
    with pytest.raises(ValueError):
        SpinModel(f_hf_mhz=-1)
    m = SpinModel(t2_beta_ms=0.46, t2_alpha=0.73)
    assert m.t2_for(16) == pytest.approx(0.46 * 16 ** 0.73)
    assert SpinModel(t2_ms=0.49).t2_for(8) == 0.49


def test_quasi_static_width_gives_gaussian_envelope():
    # averaging cos(2 pi delta tau) over the detuning spread yields exp(-(tau/T2*)^2)
    m = SpinModel(t2star_us=0.9)
    tau = np.linspace(0, 2, 9)
    s = m.detuning_sigma_mhz
    env = np.exp(-2 * (np.pi * s * tau) ** 2)
    np.testing.assert_allclose(env, np.exp(-(tau / 0.9) ** 2), rtol=1e-12)
