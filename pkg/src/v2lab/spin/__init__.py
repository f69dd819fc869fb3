"""Spin-control sequences, their simulator, and the coherence fits."""

from .executor import propagate, run_spin_sequence
from .fits import desr_fit, rabi_fit, ramsey_fit, stretched_decay_fit, t2_power_law_fit
from .models import (
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
from .readout import (
    NormalizationError,
    NormalizedReadout,
    SpinSweepRecord,
    normalize_readout,
    normalized_readout,
    read_sweep_csv,
    write_sweep_csv,
)
from .sequence import (
    MwSequence,
    PulseBlock,
    SequenceError,
    default_phases,
    dump_sequence,
    load_sequence,
    standard_sequence,
    validate_sequence,
)

__all__ = [n for n in dir() if not n.startswith("_")]
