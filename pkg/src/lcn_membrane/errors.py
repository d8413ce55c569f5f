"""Exception types raised across the package."""


class LCNError(Exception):
    """Base class for all errors raised by lcn_membrane."""


class InvalidArgumentError(LCNError, ValueError):
    pass


class UnfittedCreaseError(LCNError, ValueError):
    """A crease segment cannot be covered by edges of the requested mesh."""


class InvalidMaterialError(LCNError, ValueError):
    """Order parameters outside the physical range s, s0 > -1."""


class DegenerateElementError(LCNError, ArithmeticError):
    """det(F^T F) fell below the degeneracy floor on some element."""

    def __init__(self, message, value=None, element=None):
        super().__init__(message)
        self.value = value
        self.element = element


class SingularDirectorError(LCNError, ValueError):
    pass


class InvalidInitializerError(LCNError, ValueError):
    pass


class NotSPDError(LCNError, ArithmeticError):
    """A Cholesky factorization met a non-positive pivot."""


class SingularMatrixError(LCNError, ArithmeticError):
    pass


class DivergedNewtonError(LCNError, RuntimeError):
    """Newton sub-iteration failed; ``iteration`` is the inner index reached."""

    def __init__(self, message, iteration=None, reason=None):
        super().__init__(message)
        self.iteration = iteration
        self.reason = reason


class NoDivergingTauError(LCNError, RuntimeError):
    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class InsufficientPointsError(LCNError, ValueError):
    pass
