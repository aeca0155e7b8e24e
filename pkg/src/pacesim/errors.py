"""Exception types shared across the package."""


class PacesimError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(PacesimError, ValueError):
    """Input has the wrong shape or arity (e.g. a bid profile of the wrong length)."""


class ValidationError(PacesimError, ValueError):
    """Input is structurally fine but violates a value constraint."""


class LoadError(PacesimError, ValueError):
    """A data file could not be parsed; the message names the offending line."""


class SolverError(PacesimError, RuntimeError):
    """Numerical search failed to converge.

    Carries the last bracketing interval so callers can inspect or retry.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class ConfigError(PacesimError, ValueError):
    """An experiment configuration is inconsistent or incomplete."""
