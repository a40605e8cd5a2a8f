"""Exception hierarchy shared by all symtuck modules."""


class SymTuckError(Exception):
    """Base class for every error raised by symtuck."""


class ShapeError(SymTuckError, ValueError):
    """Operands have incompatible shapes."""


class InvalidOrderError(SymTuckError, ValueError):
    """Tensor order below 2."""


class AsymmetricTensorError(SymTuckError, ValueError):
    """Raw array is not symmetric and cannot be symmetrized cheaply."""


class ExplicitTooLargeError(SymTuckError, MemoryError):
    """The dense n**d tensor exceeds the explicit-path budget."""


class NotOrthonormalError(SymTuckError, ValueError):
    """Matrix is too far from having orthonormal columns."""


class RetractionError(SymTuckError, ArithmeticError):
    """QR retraction of a rank-deficient (or non-finite) matrix."""


class NumericalError(SymTuckError, ArithmeticError):
    """Non-finite objective or gradient encountered during iteration."""


class SingularCovarianceError(SymTuckError, ArithmeticError):
    """Sample covariance is singular and no ridge was requested."""


class UndefinedMetricError(SymTuckError, ArithmeticError):
    """A ratio metric has a zero denominator."""


class StreamUnderrunError(SymTuckError):
    """The sample stream ran out of data before the solver finished."""


class TurnstileError(SymTuckError):
    """A batch was requested out of order or more than once."""


class DegenerateLabelsError(SymTuckError, ValueError):
    """ROC-AUC requested with only one class present."""
