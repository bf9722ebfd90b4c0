"""Exception hierarchy shared by every module."""


class ScmAsymError(Exception):
    """Base class for all package errors."""


class DomainError(ScmAsymError, ValueError):
    """Inputs outside the mathematical domain (regime violations included)."""


class NumericError(ScmAsymError, ArithmeticError):
    """A numerical procedure failed to converge or met a singularity."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PoleError(NumericError):
    """Evaluation point coincides with a population eigenvalue."""


class SingularityError(NumericError):
    """A ``1 - Gamma`` denominator vanished."""


class GeometryError(DomainError):
    """A contour with the requested topology cannot be built."""


class ConvergenceError(NumericError):
    """Quadrature did not reach the requested accuracy."""

    def __init__(self, message, residual=None, nodes=None):
        super().__init__(message, residual)
        self.nodes = nodes
