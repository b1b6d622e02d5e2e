"""Numerical calculus for pseudodifferential operators with Hölder-regular symbols."""

from .errors import (
    CapabilityError,
    ConditioningError,
    HypothesisError,
    HypothesisWarning,
    InversionError,
    NumericalError,
    ParameterError,
    RoughPDOError,
    ShapeError,
)
from .gallery import gallery, list_gallery
from .grid import Grid, GridFunction, bessel_multiplier, forward_fourier, inverse_fourier, sobolev_norm
from .symbol_core import Symbol, SymbolClassSpec, fit_decay_exponent, sampling_plan, verify_symbol_class
from .calculus import DiscretizedOperator, operator_norm, quantize, sharp_expansion
from .smoothing import SmoothingConfig, split
from .oscint import OscIntConfig, amplitude_gallery, osc_integral
from .fredholm import (
    FredholmExperimentConfig,
    ParametrixConfig,
    build_parametrix,
    compactness_proxy,
    ellipticity_check,
    fredholm_experiment,
    kernel_dimensions,
    winding_index,
)

__version__ = "0.1.0"

__all__ = [
    "CapabilityError", "ConditioningError", "DiscretizedOperator", "FredholmExperimentConfig", "Grid",
    "GridFunction", "HypothesisError", "HypothesisWarning", "InversionError", "NumericalError", "OscIntConfig",
    "ParameterError", "ParametrixConfig", "RoughPDOError", "ShapeError", "SmoothingConfig", "Symbol",
    "SymbolClassSpec", "amplitude_gallery", "bessel_multiplier", "build_parametrix", "compactness_proxy",
    "ellipticity_check", "fit_decay_exponent", "forward_fourier", "fredholm_experiment", "gallery",
    "inverse_fourier", "kernel_dimensions", "list_gallery", "operator_norm", "osc_integral", "quantize",
    "sampling_plan", "sharp_expansion", "sobolev_norm", "split", "verify_symbol_class", "winding_index",
]
