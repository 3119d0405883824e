"""Exception types raised by the lab."""


class LabError(Exception):
    pass


class DomainError(LabError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class RegimeError(LabError, ValueError):
    """A log log guard tripped: the height is too large for the LIL regime."""


class ResolutionError(LabError, ValueError):
    """Evaluation was requested below the resolution floor of a discretized measure."""


class ConfigError(LabError, ValueError):
    pass


class QuadratureError(LabError, ArithmeticError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SaturationError(LabError, ArithmeticError):
    """|f| is numerically 1 on the evaluation path."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
