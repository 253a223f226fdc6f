"""Exception and warning classes."""


class CensGofError(Exception):
    """Base class for all errors raised by censgof."""

    stage = None


class ParameterDomainError(CensGofError, ValueError):
    pass


class DomainError(CensGofError, ValueError):
    """An argument lies outside the domain of a function."""


class ShapeError(CensGofError, ValueError):
    pass


class DegenerateInputError(CensGofError, ValueError):
    """Input is degenerate (zero scale, zero denominator, point mass)."""


class UnsupportedNullError(CensGofError, ValueError):
    pass


class ConfigurationError(CensGofError, ValueError):
    pass


class CoverageError(CensGofError, ValueError):
    """A rank summary was requested over an incomplete grid."""

    def __init__(self, missing):
        self.missing = list(missing)
        head = ", ".join(str(m) for m in self.missing[:5])
        more = "" if len(self.missing) <= 5 else f" (+{len(self.missing) - 5} more)"
        super().__init__(f"incomplete grid, missing cells: {head}{more}")


class ConvergenceError(CensGofError, RuntimeError):
    """An iterative solver did not converge.

    The best iterate found is kept on ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class StudyAbortedError(CensGofError, RuntimeError):
    pass


class ClampWarning(UserWarning):
    """Probabilities were clamped away from 0 or 1."""


class TieWarning(UserWarning):
    pass


class PrecisionWarning(UserWarning):
    """Too few Monte Carlo replications for the requested level."""


class DecompositionError(CensGofError, RuntimeError):
    """The exact process decomposition identity failed numerically."""
