"""Exception hierarchy shared across the package."""


class IseError(Exception):
    """Base class for every error raised by interval_dsse."""


class DomainError(IseError, ArithmeticError):
    """Interval operation outside its domain (e.g. division by an interval containing 0)."""


class UsageError(IseError, ValueError):
    """Caller passed inconsistent arguments (dimension mismatch, unknown ids, ...)."""


class FeederError(IseError, ValueError):
    """Feeder document violates the schema, radiality or phase consistency."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class ConfigurationError(IseError, ValueError):
    """Case or measurement configuration cannot be used (e.g. zero sigma on a weighted channel)."""


class DivergenceError(IseError, RuntimeError):
    """An iterative point solver (power flow, iterative WLS) failed to converge."""


class UnobservableError(IseError, ArithmeticError):
    """The gain matrix H^T W H is singular for the given placements."""

    def __init__(self, message, columns=()):
        self.columns = tuple(columns)
        super().__init__(message)


class StructuralDeficiencyError(IseError, ArithmeticError):
    """Midpoint matrix of an interval system is singular."""


class PreconditioningError(IseError, ArithmeticError):
    """||I - C A||_inf >= 1, so Krawczyk contraction is not guaranteed."""

    def __init__(self, message, beta=None):
        self.beta = beta
        super().__init__(message)


class InconsistencyError(IseError, ArithmeticError):
    """An intersection in a Krawczyk-type iteration became empty."""


class NonConvergenceError(IseError, RuntimeError):
    """Iteration cap reached before the stopping rule was satisfied."""


class EliminationBreakdownError(IseError, ArithmeticError):
    """Interval Gaussian elimination met a pivot interval containing zero."""

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message)


class OracleLimitError(IseError, ValueError):
    """Vertex enumeration requested for more interval entries than allowed."""
