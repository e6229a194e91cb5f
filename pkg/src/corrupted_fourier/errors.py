"""Exception types raised across the package."""


class RecoveryError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(RecoveryError, ValueError):
    pass


class NotPerfectSquare(RecoveryError, ValueError):
    pass


class NotPrime(RecoveryError, ValueError):
    pass


class ZeroVector(RecoveryError, ValueError):
    pass


class CardinalityTooLarge(RecoveryError, ValueError):
    pass


class InfeasibleSizes(RecoveryError, ValueError):
    pass


class KeepNotSubset(RecoveryError, ValueError):
    pass


class SizeTooLarge(RecoveryError, ValueError):
    pass


class InfeasiblePlan(RecoveryError):
    pass


class SingularGram(RecoveryError):
    """Gram matrix of the golfing pseudo-inverse step is numerically singular."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class Infeasible(RecoveryError):
    pass


class SolverStall(RecoveryError):
    pass


class EmptyEnsemble(RecoveryError, ValueError):
    pass


class ConfigError(RecoveryError):
    """Invalid experiment configuration.

    ``field`` names the offending key and ``line`` its 1-based line in the
    config file when known.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = ""
        if field is not None:
            where += f"field '{field}'"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}" if where else message)
