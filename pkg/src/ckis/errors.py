"""Exception types raised across the package."""


class CKISError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CKISError, ValueError):
    """An argument is outside the domain of the operation."""


class SingularSystemError(CKISError, ArithmeticError):
    """Cholesky factorization failed even at the largest jitter level."""


class AbsoluteContinuityError(CKISError, ArithmeticError):
    """The proposal density vanished at a drawn particle."""


class DegenerateNormalizerError(CKISError, ArithmeticError):
    """The weight sum used for self-normalization is (numerically) zero."""


class NonFiniteValueError(CKISError, ArithmeticError):
    """A density, weight or test-function value came out NaN or infinite."""
