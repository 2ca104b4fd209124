"""Exception types shared across the package."""


class ActiveMixError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ActiveMixError, ValueError):
    """Invalid parameters or insufficient resolution."""


class DataError(ActiveMixError, ValueError):
    """Non-finite or otherwise malformed input data."""


class DomainError(ActiveMixError, ValueError):
    """Argument outside the domain of a formula."""


class DivergedRunError(ActiveMixError, RuntimeError):
    """A time march overflowed.

    Carries the time of failure and the partial trace recorded up to it, so
    callers can still fit a growth rate from the pre-overflow window.
    """

    def __init__(self, message, time=None, trace=None):
        super().__init__(message)
        self.time = time
        self.trace = trace


class ConsistencyError(ActiveMixError, RuntimeError):
    """An internal numerical consistency check failed."""


class ConvergenceError(ActiveMixError, RuntimeError):
    """An iterative solver did not converge."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class InsufficientDataError(ActiveMixError, ValueError):
    """Too few usable samples for a fit."""


class DegenerateInputError(ActiveMixError, ValueError):
    """Input makes a requested ratio or statistic undefined."""
