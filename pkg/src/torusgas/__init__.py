"""torusgas: a 1D periodic pseudo-spectral lab for compressible flows with
local and fractional nonlocal dissipation, plus an entropy-hierarchy
diagnostics engine verifying the balance laws, sign conditions, vacuum
bounds, and flocking decay the model supports."""

from .config import RunConfig, parse_config
from .diagnostics import DiagnosticsEngine, DiagRecord
from .errors import (ConfigError, NonzeroMeanError, NumericFaultError,
                     ParameterError, TorusGasError, VacuumError)
from .model import ModelParams, State, Tendency
from .spectral import FracKernelSpec, Grid
from .timestepping import Forcing, StepControl, Trajectory, initial_data, run

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DiagRecord", "DiagnosticsEngine", "Forcing", "FracKernelSpec",
    "Grid", "ModelParams", "NonzeroMeanError", "NumericFaultError", "ParameterError",
    "RunConfig", "State", "StepControl", "Tendency", "TorusGasError", "Trajectory",
    "VacuumError", "initial_data", "parse_config", "run",
]
