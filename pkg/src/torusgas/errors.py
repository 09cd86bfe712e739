"""Exception types shared across the package."""


class TorusGasError(Exception):
    """Base class for all package-specific failures."""


class ParameterError(TorusGasError, ValueError):
    """A parameter lies outside its admissible domain."""


class NumericFaultError(TorusGasError, FloatingPointError):
    """A field contains NaN/Inf or an operation produced one."""


class VacuumError(TorusGasError):
    """Density dropped to (or below) the vacuum floor.

    Carries the time and grid location of the breach when known.
    """

    def __init__(self, message, t=None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


class NonzeroMeanError(ParameterError):
    """A periodic antiderivative was requested for a field with nonzero mean."""


class ConfigError(TorusGasError, ValueError):
    """A run configuration is malformed or violates a constraint."""
