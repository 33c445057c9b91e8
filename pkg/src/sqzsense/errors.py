"""Exception hierarchy shared by all modules."""


class SQZError(Exception):
    """Base class for all package errors."""


class ValidationError(SQZError, ValueError):
    """Malformed input, configuration, or incompatible grids."""


class DomainError(SQZError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(SQZError, ArithmeticError):
    """Quadrature failure, ill-conditioning, or non-finite results."""


class EstimationError(NumericalError):
    """A statistical estimate could not be formed from the given records."""
