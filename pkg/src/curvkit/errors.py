"""Exception types raised across curvkit."""


class CurvkitError(Exception):
    """Base class for all curvkit errors."""


class InvalidInputError(CurvkitError, ValueError):
    """Raised when an argument violates a documented precondition."""


class DegenerateNeighborhoodError(CurvkitError, ArithmeticError):
    """Raised when a neighborhood carries no usable tangent information."""
