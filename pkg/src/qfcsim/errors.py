"""Exception types raised across the package."""


class QfcError(Exception):
    """Base class for all package errors."""


class DomainError(QfcError, ValueError):
    """An argument lies outside the domain of a model or formula."""


class ConfigurationError(QfcError, ValueError):
    """A parameter set violates its invariants or cannot be realized."""


class NumericalError(QfcError, RuntimeError):
    """A root finder, optimizer or scan failed to produce a result."""


class ResourceError(QfcError, MemoryError):
    """A requested simulation would exceed the configured memory budget."""


class FitError(NumericalError):
    """A least-squares fit did not converge."""


class StatisticsError(QfcError, ValueError):
    """Not enough data to form the requested estimate."""


class CalibrationError(QfcError, RuntimeError):
    """A calibration goal is not reachable inside the knob bounds."""
