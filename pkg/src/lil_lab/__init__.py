"""Numerical laboratory for laws of the iterated logarithm for Bloch-type functions,
dyadic martingales, cascade measures and inner functions of the disc."""

from . import calibration, cascade, disc, field, gauges, martingale, rng, threshold
from .errors import (ConfigError, DomainError, LabError, QuadratureError, RegimeError,
                     ResolutionError, SaturationError)

__version__ = "0.1.0"
