"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the set on which an operation is defined."""


class ResourceError(RuntimeError):
    """A configured size cap (quadrature nodes, tuple arity, enumeration) was exceeded."""

    def __init__(self, message, required=None, limit=None):
        super().__init__(message)
        self.required = required
        self.limit = limit


class ZeroFreenessError(ArithmeticError):
    """A partition function used as a denominator is too close to zero."""

    def __init__(self, message, magnitude, tail, floor):
        super().__init__(message)
        self.magnitude = magnitude
        self.tail = tail
        self.floor = floor


class ConvergenceError(ArithmeticError):
    """Polynomial root polishing failed to reach the residual target."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals
