"""Optical-response models, Monte Carlo forward simulators and their fits."""

from .checkprobe import (
    DensityTruncationWarning,
    InsufficientDataError,
    apparent_fwhm,
    checkprobe_spectrum,
    checkprobe_variance,
    density_grid,
    fit_checkprobe_linewidth,
    heralded_spectral_density,
    postselect_probe_spectrum,
    simulate_check_probe,
)
from .collection import collection_efficiency
from .diffusion import (
    bin_heralded_counts,
    diffusion_only_model,
    fit_spectral_diffusion,
    no_recapture_model,
    simulate_diffusion_records,
)
from .g2 import g2_histogram, g2_zero, mixed_g2_zero, read_timestamps, simulate_g2, write_timestamps
from .io import read_records_csv, write_records_csv
from .lineshape import incomplete_gamma, log_poisson_tail, lorentzian_response, poisson_tail
from .models import CheckProbeRecord, CheckProbeRecords, EmitterModel, FarFieldProfile, FrequencyPrior
from .saturation import rho_at_psat, saturation_curve, saturation_fit

__all__ = [name for name in dir() if not name.startswith("_")]
