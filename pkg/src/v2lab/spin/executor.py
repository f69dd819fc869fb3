"""Monte Carlo execution of a block sequence on a single spin."""

from __future__ import annotations

import logging

import numpy as np

from ..rng import substream
from .models import SpinModel, compose, free_evolution, rotation, transfer_probability
from .readout import SpinSweepRecord
from .sequence import PulseBlock, validate_sequence

log = logging.getLogger(__name__)

# block duration (us) in which the emitter's c0 photons are collected
REFERENCE_BLOCK_US = 60.0


def propagate(mw, value: float, detuning) -> np.ndarray:
    """Transfer probability of the payload at sweep ``value`` for each static detuning.

    ``detuning`` is the spin transition minus the carrier frequency (MHz).
    """
    detuning = np.asarray(detuning, dtype=float)
    op = (np.ones_like(detuning, dtype=complex), np.zeros_like(detuning, dtype=complex))
    for step in mw.operations(value):
        if step[0] == "pulse":
            _, phase, dur = step
            nxt = rotation(mw.rabi_mhz, detuning, phase, dur)
        else:
            nxt = free_evolution(detuning, step[1])
        op = compose(nxt, op)
    return transfer_probability(op)


def _block_mean(block: PulseBlock, rate_per_ref: float) -> float:
    return rate_per_ref * block.duration_us / REFERENCE_BLOCK_US


def run_spin_sequence(blocks: list[PulseBlock], spin: SpinModel, emitter, n_reps: int,
                      seed: int = 0) -> list[SpinSweepRecord]:
    """Run every sweep value of the sequence ``n_reps`` times.

    In each repetition the emitter is on resonance with probability
    ``spin.p_resonant``; otherwise every counting block sees only
    background. The nuclear spin adds a static ``+-f_hf/2`` detuning with
    equal weights and a Gaussian quasi-static detuning of width
    ``spin.detuning_sigma_mhz`` is drawn per repetition. The spin starts
    pumped (readout dark), the microwave payload is applied as a unitary, and
    echo-type payloads additionally lose coherence as
    ``exp(-(t/T2)^n)``. Counting blocks draw Poisson counts: ``norm1`` bright,
    ``norm0`` dark, readout bright or dark after projecting the spin. Bright
    means are ``emitter.c0`` per 60 us of block time, dark means are
    ``bright * (1 - contrast)``.

    Each sweep value uses its own random substream, so results do not
    depend on how sweep values are scheduled.
    """
    mw = validate_sequence(blocks)
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    by_kind = {b.kind: b for b in blocks if b.counts_recorded}
    for kind in ("check", "norm1", "norm0", "readout"):
        if kind not in by_kind:
            raise ValueError(f"sequence does not record counts in a {kind} block")
    bright = float(emitter.c0)
    dark = bright * (1.0 - spin.contrast)
    t2_ms = spin.t2_for(mw.n_pulses)

    records = []
    for idx, value in enumerate(mw.sweep):
        rng = substream(seed, "spin", idx)
        resonant = rng.random(n_reps) < spin.p_resonant
        nuclear = np.where(rng.random(n_reps) < 0.5, 0.5, -0.5) * spin.f_hf_mhz
        static = rng.normal(0.0, spin.detuning_sigma_mhz, n_reps)
        detuning = spin.f0_mhz + nuclear + static - mw.carrier(value)
        p = propagate(mw, value, detuning)
        if mw.n_pulses:
            t_ms = mw.free_time(value) * 1e-3
            p = 0.5 + (p - 0.5) * np.exp(-((t_ms / t2_ms) ** spin.decay_exponent))
        flipped = rng.random(n_reps) < p

        def counts(kind, on_rate):
            block = by_kind[kind]
            mean = np.where(resonant, _block_mean(block, 1.0) * on_rate,
                            _block_mean(block, spin.background))
            return rng.poisson(mean)

        check = counts("check", bright)
        norm1 = counts("norm1", bright)
        norm0 = counts("norm0", dark)
        ro = counts("readout", np.where(flipped, bright, dark))
        records.append(SpinSweepRecord(value, check, norm1, norm0, ro))
    log.debug("ran %d sweep values x %d repetitions", len(records), n_reps)
    return records
