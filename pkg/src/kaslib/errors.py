"""Exception hierarchy shared by all kaslib modules."""


class KasError(Exception):
    """Base class for every error raised by kaslib."""


class DimensionError(KasError, ValueError):
    """Array shapes are inconsistent."""


class DomainError(KasError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class RangeError(KasError, ValueError):
    """An input coordinate falls outside its declared bounds."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class SchemaError(KasError, ValueError):
    """A data file does not follow the expected layout."""

    def __init__(self, message, path=None, row=None):
        super().__init__(message)
        self.path = path
        self.row = row


class ParseError(SchemaError):
    """A data file cell could not be parsed as a number."""


class FactorizationError(KasError, ArithmeticError):
    """Cholesky factorization failed even after jitter escalation."""

    def __init__(self, message, jitter):
        super().__init__(message)
        self.jitter = jitter


class SingularityError(KasError, ArithmeticError):
    """The feature-map Jacobian is rank deficient."""

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class UnsupportedError(KasError, ValueError):
    """The requested operation does not apply to this object."""


class StateError(KasError, RuntimeError):
    """An object lacks state required by the operation."""


class FitError(KasError, RuntimeError):
    """Gaussian process hyperparameter fitting failed."""


class FoldError(KasError):
    """Wraps an error raised while evaluating one cross-validation fold."""

    def __init__(self, fold, cause):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause
