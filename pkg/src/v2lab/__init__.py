"""Simulation and analysis toolkit for V2-center spectroscopy and spin-coherence experiments.

Subpackages: :mod:`v2lab.photophysics` (optical response, check-probe and
diffusion simulators and fits, g2, saturation), :mod:`v2lab.spin` (pulse
sequences, executor and coherence fits), :mod:`v2lab.survey` (PLE peak
surveys and cohort statistics). :mod:`v2lab.optim` holds the shared
least-squares engine.
"""

__version__ = "0.1.0"

from .optim import FitError, FitResult, ParamSpec, fit_least_squares, numeric_jacobian

__all__ = ["FitError", "FitResult", "ParamSpec", "fit_least_squares", "numeric_jacobian", "__version__"]
