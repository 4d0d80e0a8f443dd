"""High-frequency probing lab for semilinear wave equations."""

from . import errors
from .model import (
    COMPLEX,
    COMPLEX_WAVE,
    REAL,
    REAL_WAVE,
    Envelope,
    ExperimentConfig,
    Grid2D,
    OddGeneral,
    OddSeparated,
    PolyInP,
    PolynomialNonlinearity,
    ProbeSpec,
    ScalarField2D,
    ZeroNonlinearity,
    cauchy_data,
    cubic_odd,
    default_grid,
    eval_nonlinearity,
    gaussian_field,
    gaussian_support_radius,
    phase,
    unit_direction,
)

__all__ = [
    "errors",
    "COMPLEX", "COMPLEX_WAVE", "REAL", "REAL_WAVE",
    "Envelope", "ExperimentConfig", "Grid2D", "OddGeneral", "OddSeparated",
    "PolyInP", "PolynomialNonlinearity", "ProbeSpec", "ScalarField2D",
    "ZeroNonlinearity", "cauchy_data", "cubic_odd", "default_grid",
    "eval_nonlinearity", "gaussian_field", "gaussian_support_radius",
    "phase", "unit_direction",
]
