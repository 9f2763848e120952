"""Exception hierarchy.

Validation errors (bad inputs or configurations) and numerical failures
(non-convergence, loss of positivity) are kept in separate branches so
callers such as the command line front end can map them to exit codes.
"""


class ConeCocycleError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ConeCocycleError, ValueError):
    """Invalid input: a precondition or a structural invariant is violated."""


class DomainError(ValidationError):
    """A point or argument lies outside the admissible domain."""


class ResolutionError(ValidationError):
    """The grid resolution is too coarse for the requested operation."""


class DepthError(ValidationError):
    """A requested depth/window is unavailable or exceeds a guard."""


class NumericalError(ConeCocycleError, ArithmeticError):
    """A numerical procedure failed."""


class BranchInversionError(NumericalError):
    """Inverse-branch solver did not converge."""


class ConeViolationError(NumericalError):
    """A quantity that must be strictly positive is not."""


class ContractionFailure(NumericalError):
    """The cocycle or operator fails to contract as required."""


class ConvergenceError(NumericalError):
    """Iteration stopped before reaching the requested tolerance."""


class DerivativeInconsistencyError(NumericalError):
    """A derivative identity is violated beyond tolerance."""


class BracketError(NumericalError):
    """No sign change in the root bracket."""


class MonotonicityError(NumericalError):
    """A quantity required to be monotone is not."""
