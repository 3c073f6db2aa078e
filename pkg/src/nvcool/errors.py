"""Exception hierarchy shared by the numerical modules and the CLI."""


class NVCoolError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(NVCoolError, ValueError):
    pass


class DimensionMismatchError(NVCoolError, ValueError):
    pass


class InvalidParameterError(NVCoolError, ValueError):
    pass


class InvalidRegimeError(InvalidParameterError):
    """A formula was evaluated outside the regime where it is defined (e.g. zero spin decay)."""


class NumericalConsistencyError(NVCoolError, ArithmeticError):
    pass


class IntegratorInstabilityError(NumericalConsistencyError):
    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} (t={time:.6g})")
        self.time = time


class ModelViolationError(NumericalConsistencyError):
    pass


class ConfigError(NVCoolError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
