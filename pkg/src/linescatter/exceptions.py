"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`ScatteringError`; the CLI maps the subclasses onto exit codes.
"""


class ScatteringError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ContractViolation(ScatteringError, ValueError):
    """A precondition of an operation was not met by its arguments."""

    exit_code = 2


class DomainError(ScatteringError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""

    exit_code = 2


class IntegrationError(ScatteringError, RuntimeError):
    """The ODE integrator failed (step-size underflow, non-finite state)."""


class NumericalDegeneracy(ScatteringError, RuntimeError):
    """A quantity needed as a divisor became numerically zero."""


class InconclusiveFit(ScatteringError, RuntimeError):
    """A tail fit could not decide between competing models."""


class StagnationError(ScatteringError, RuntimeError):
    """An iterative fit stopped making progress."""


class ValidationFailure(ScatteringError, AssertionError):
    """A validation suite check failed."""

    exit_code = 4
