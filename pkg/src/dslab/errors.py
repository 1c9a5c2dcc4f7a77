"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateInputError(DomainError):
    """Input is degenerate at working precision (e.g. ``||q beta|| == 0``)."""

    def __init__(self, message, q=None):
        super().__init__(message)
        self.q = q


class UnsupportedInputError(ValueError):
    """Input is well-defined but outside what an operation supports."""


class PrecisionError(ArithmeticError):
    """A certified comparison could not be decided at the maximum precision."""
