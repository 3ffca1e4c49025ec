"""Exception types raised across the package."""


class SapgError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(SapgError, ValueError):
    pass


class EmptyInput(SapgError, ValueError):
    pass


class NotPositiveDefinite(SapgError, ArithmeticError):
    """A Cholesky pivot fell below tolerance.

    For a truss this means the design lies outside the region where the
    stiffness matrix is invertible.
    """


class NoConvergence(SapgError, ArithmeticError):
    pass


class EmptySet(SapgError, ValueError):
    pass


class InfeasibleVolumeBudget(EmptySet):
    """``x_min * sum(lengths)`` already exceeds the volume budget."""


class InvalidGeometry(SapgError, ValueError):
    pass


class IndexOutOfRange(SapgError, IndexError):
    pass


class InvalidIteration(SapgError, ValueError):
    pass


class MissingStates(SapgError, ValueError):
    pass


class ConfigError(SapgError, ValueError):
    """Bad experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalBreakdown(SapgError, ArithmeticError):
    """A solver produced a non-finite or infeasible value.

    The partially recorded trace is attached as ``trace`` so callers can
    still write it out.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
