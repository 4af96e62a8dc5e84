"""Exception hierarchy shared by all modules."""


class VGError(Exception):
    """Base class for package errors."""


class ValidationError(VGError, ValueError):
    """Inputs violate a documented constraint (CLI exit status 2)."""


class DomainError(ValidationError):
    """A voltage or conductance lies outside the state space."""


class ParameterError(ValidationError):
    """Invalid model or configuration parameters."""


class ArgumentError(ValidationError):
    """Invalid argument to an operation (sizes, windows, counts)."""


class PreconditionError(ValidationError):
    """A mathematical precondition of an operation does not hold."""


class NumericError(VGError, ArithmeticError):
    """Non-finite values appeared during a computation (CLI exit status 1)."""
