"""PLE peak surveys and cohort statistics."""

from .io import (
    read_damage_csv,
    read_peaks_dir,
    read_ple_csv,
    read_plmap_csv,
    write_damage_csv,
    write_peaks_json,
    write_ple_csv,
    write_plmap_csv,
)
from .peaks import (
    MAX_FWHM_MHZ,
    MIN_AMPLITUDE_KHZ,
    MIN_FWHM_MHZ,
    MIN_SEPARATION_GHZ,
    PlePeak,
    PleSpectrum,
    detect_ple_peaks,
    ple_trace,
    robust_noise,
    simulate_cohort,
    simulate_pillar,
)
from .stats import (
    DamageTable,
    OccurrenceStats,
    PlMap,
    amorphization_fit,
    damage_probability,
    exceedance_curve,
    inhomogeneous_fit,
    occurrence_stats,
    regime_labels,
    rescale_pl_maps,
)
from .voigt import faddeeva_humlicek, voigt_fwhm, voigt_profile

__all__ = [n for n in dir() if not n.startswith("_")]
