class QevorecError(Exception):
    """Base class for library errors."""


class DimensionError(QevorecError, ValueError):
    pass


class ConvergenceError(QevorecError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DomainError(QevorecError, ValueError):
    """Input outside the mathematical domain of the operation."""


class ArgumentError(QevorecError, ValueError):
    pass


class PreconditionError(QevorecError, ValueError):
    pass


class SpecError(QevorecError, ValueError):
    """Inconsistent database specification."""
