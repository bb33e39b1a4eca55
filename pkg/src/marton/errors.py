"""Exception and warning types raised across the package."""


class MartonError(Exception):
    """Base class for all errors raised by this package."""


class NegativeEntry(MartonError, ValueError):
    pass


class SumOutOfTolerance(MartonError, ValueError):
    pass


class AlphabetMismatch(MartonError, ValueError):
    pass


class DomainError(MartonError, ValueError):
    pass


class OutOfRange(MartonError, ValueError):
    pass


class AlphabetTooLarge(MartonError, ValueError):
    pass


class NotBimodal(MartonError, ValueError):
    pass


class Infeasible(MartonError):
    pass


class Unbounded(MartonError):
    pass


class ConfigurationError(MartonError, ValueError):
    pass


class ParseError(MartonError, ValueError):
    """Malformed instance file. ``lineno`` is 1-based, or None if not line specific."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class DimensionMismatch(ParseError):
    pass


class NonConvergenceWarning(RuntimeWarning):
    """An iterative solver hit ``max_itr`` before meeting its tolerance.

    Not fatal: the last iterate is returned with ``converged=False``.
    """
