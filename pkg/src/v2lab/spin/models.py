"""Two-level spin propagation and the closed-form coherence models."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpinModel:
    """Electron spin seen by the simulator.

    Frequencies in MHz, ``t2star_us`` in microseconds, ``t2_ms`` in
    milliseconds. When ``t2_beta_ms`` is set, the coherence time for ``N``
    refocusing pulses is ``t2_beta_ms * N**t2_alpha`` instead of ``t2_ms``.
    ``contrast`` sets the dark-state count rate to ``bright * (1 - contrast)``;
    ``p_resonant`` is the probability that the emitter is on resonance (and
    optically bright) in a repetition; ``background`` is the mean count per
    block otherwise.
    """

    rabi_mhz: float = 1.0
    f0_mhz: float = 181.8
    f_hf_mhz: float = 0.0
    t2star_us: float = 1.0
    t2_ms: float = 0.5
    decay_exponent: float = 2.0
    t2_beta_ms: float | None = None
    t2_alpha: float | None = None
    contrast: float = 0.8
    p_resonant: float = 0.8
    background: float = 0.05

    def __post_init__(self):
        if not self.rabi_mhz > 0:
            raise ValueError("rabi frequency must be positive")
        if self.f_hf_mhz < 0:
            raise ValueError("hyperfine splitting must be non-negative")
        if not self.t2star_us > 0 or not self.t2_ms > 0:
            raise ValueError("coherence times must be positive")
        if self.t2_alpha is not None and not 0 < self.t2_alpha < 1.5:
            raise ValueError("t2_alpha must lie in (0, 1.5)")
        if not 0 <= self.contrast <= 1 or not 0 <= self.p_resonant <= 1:
            raise ValueError("contrast and p_resonant must lie in [0, 1]")

    def t2_for(self, n_pulses: int) -> float:
        if self.t2_beta_ms is not None:
            return self.t2_beta_ms * max(n_pulses, 1) ** (self.t2_alpha if self.t2_alpha is not None else 0.0)
        return self.t2_ms

    @property
    def detuning_sigma_mhz(self) -> float:
        """Quasi-static detuning spread giving a ``exp(-(tau/T2*)**2)`` Ramsey envelope."""
        return 1.0 / (math.sqrt(2.0) * math.pi * self.t2star_us)


def rabi_chevron(t, detuning, omega, f_hf=0.0):
    """Transfer probability of a square pulse, averaged over the two nuclear projections.

    ``P = W/(W + d^2) * sin^2(pi sqrt(W + d^2) t)`` with ``W = omega^2`` and
    ``d = detuning +- f_hf/2``. ``t`` in us, frequencies in MHz.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    t = np.asarray(t, dtype=float)
    detuning = np.asarray(detuning, dtype=float)
    total = 0.0
    for s in (0.5, -0.5):
        d = detuning + s * f_hf
        w2 = omega * omega + d * d
        total = total + omega * omega / w2 * np.sin(np.pi * np.sqrt(w2) * t) ** 2
    return 0.5 * total


# SU(2) operators are stored as (a, b) for [[a, -conj(b)], [b, conj(a)]].

def rotation(omega, detuning, phase_deg, duration):
    """Propagator of a square pulse (Rabi ``omega``, ``detuning`` in MHz, ``duration`` in us)."""
    omega = np.asarray(omega, dtype=float)
    detuning = np.asarray(detuning, dtype=float)
    w = np.sqrt(omega * omega + detuning * detuning)
    half = np.pi * w * duration
    c = np.cos(half)
    s = np.sin(half)
    with np.errstate(invalid="ignore", divide="ignore"):
        nz = np.where(w > 0, detuning / w, 0.0)
        nxy = np.where(w > 0, omega / w, 0.0)
    phi = math.radians(phase_deg)
    nx, ny = nxy * math.cos(phi), nxy * math.sin(phi)
    a = c - 1j * s * nz
    b = s * (ny - 1j * nx)
    return a, b


def free_evolution(detuning, duration):
    detuning = np.asarray(detuning, dtype=float)
    a = np.exp(-1j * np.pi * detuning * duration)
    return a, np.zeros_like(a)


def compose(second, first):
    """Operator for ``first`` followed by ``second``."""
    a2, b2 = second
    a1, b1 = first
    return a2 * a1 - np.conj(b2) * b1, b2 * a1 + np.conj(a2) * b1


def transfer_probability(op) -> np.ndarray:
    return np.abs(op[1]) ** 2


def ramsey_model(tau, b, a0, phi0, a1, phi1, f_c, f_hf, t2star):
    """``b + exp(-(tau/T2*)^2) * sum_i A_i cos(2 pi (f_c -+ f_hf/2) tau + phi_i)``.

    Component 0 oscillates at ``f_c + f_hf/2`` and component 1 at ``f_c - f_hf/2``.
    """
    tau = np.asarray(tau, dtype=float)
    env = np.exp(-(tau / t2star) ** 2)
    osc = (a0 * np.cos(2 * np.pi * (f_c + 0.5 * f_hf) * tau + phi0)
           + a1 * np.cos(2 * np.pi * (f_c - 0.5 * f_hf) * tau + phi1))
    return b + env * osc


def stretched_decay(t, b, a, t2, n):
    t = np.asarray(t, dtype=float)
    return b + a * np.exp(-np.power(np.abs(t) / t2, n))


def power_law(n_pulses, beta, alpha):
    return beta * np.power(np.asarray(n_pulses, dtype=float), alpha)


def desr_lines(f, b, a1, c1, a2, c2, fwhm):
    """Two Gaussian lines with a shared FWHM on a constant baseline."""
    f = np.asarray(f, dtype=float)
    k = 4.0 * math.log(2.0) / (fwhm * fwhm)
    return b + a1 * np.exp(-k * (f - c1) ** 2) + a2 * np.exp(-k * (f - c2) ** 2)


def t2star_from_fwhm(fwhm_mhz: float) -> float:
    """Dephasing time (us) of a Gaussian line: ``2 sqrt(ln 2) / (pi FWHM)``."""
    return 2.0 * math.sqrt(math.log(2.0)) / (math.pi * fwhm_mhz)
