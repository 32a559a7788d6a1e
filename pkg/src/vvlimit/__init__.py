"""Numerical laboratory for degenerate-viscosity compressible flow.

The package integrates the symmetrized power-of-density formulation of
isentropic compressible flow with density-degenerate viscosities around
an expanding background velocity, and measures the quantities the
accompanying analysis predicts: admissibility of the parameter set,
time-weighted energy decay, the global-existence threshold of the
scalar comparison equation, and the vanishing-viscosity convergence
rate against a matched inviscid run.
"""
from .background import BackgroundFlow, InitialVelocity
from .constants import (
    ConditionReport,
    DerivedConstants,
    ModelParameters,
    check_conditions,
    derive_constants,
)
from .errors import (
    BlowUpError,
    ConfigError,
    FitError,
    PreconditionError,
    VvlimitError,
)
from .grid import Grid
from .scenarios import DensityProfile, InitialData, make_initial_data
from .solver import Simulation, SolverConfig, State

__version__ = "0.1.0"

__all__ = [
    "BackgroundFlow",
    "BlowUpError",
    "ConditionReport",
    "ConfigError",
    "DensityProfile",
    "DerivedConstants",
    "FitError",
    "Grid",
    "InitialData",
    "InitialVelocity",
    "ModelParameters",
    "PreconditionError",
    "Simulation",
    "SolverConfig",
    "State",
    "VvlimitError",
    "check_conditions",
    "derive_constants",
    "make_initial_data",
    "__version__",
]
