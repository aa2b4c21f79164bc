"""Exception hierarchy shared by every module of the package."""


class KrigingError(Exception):
    """Base class for all errors raised by :mod:`kriging_reliability`."""


class ParameterError(KrigingError, ValueError):
    """A model or kernel parameter lies outside its admissible range."""


class InputError(KrigingError, ValueError):
    """Malformed input data (NaNs, length mismatches, duplicates)."""


class DomainError(KrigingError, ValueError):
    """A scalar argument lies outside the domain of a function."""


class ModeError(KrigingError, ValueError):
    """An operation was requested for a model in an incompatible mode."""


class ShapeError(KrigingError, ValueError):
    """Array or design sizes are inconsistent with the request."""


class ConditioningError(KrigingError, ArithmeticError):
    """A correlation matrix could not be factorized stably."""


class ConfigError(KrigingError, ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
