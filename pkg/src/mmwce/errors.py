"""Exception types shared across the package."""
import numpy as np


class DimensionError(ValueError):
    """A size or shape argument is invalid."""


class ConfigError(ValueError):
    """An experiment or estimator configuration is inconsistent."""


class PreconditionError(ValueError):
    """An input violates an operation's precondition."""


class FactorizationError(np.linalg.LinAlgError):
    """A covariance block could not be factorized."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame


class FormatError(ValueError):
    """A weight or dataset file could not be parsed."""


class ShapeError(FormatError):
    """Declared tensor shape disagrees with the payload."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a usable result."""
