"""Exception hierarchy.

Two families: :class:`ValidationError` for bad inputs, shapes and
configuration (caught before heavy computation, CLI exit code 1), and
:class:`NumericError` for computations that degenerate at run time
(singular systems, empty spectra, CLI exit code 2).
"""


class ValidationError(ValueError):
    """Invalid configuration, shapes, or input data."""


class NumericError(RuntimeError):
    """A computation degenerated numerically."""


class InvalidConfigurationError(ValidationError):
    """Parameters outside their admissible range."""


class ShapeError(ValidationError):
    """Array dimensions do not match the operation contract."""


class InsufficientSampleError(ValidationError):
    """Too few cases to fit the requested model."""


class IncompleteObservationError(ValidationError):
    """An operation requiring complete cases received missing components."""


class CannotInitializeError(ValidationError):
    """No complete cases available to start sequential imputation."""


class InvalidSeverityError(ValidationError):
    """Contamination severity outside the admissible range."""


class DegenerateBasisError(NumericError):
    """The basis Gram matrix is numerically singular."""


class RankDeficientFitError(NumericError):
    """Unpenalized least squares normal equations are singular."""


class ConstructionError(NumericError):
    """A constructed covariance operator failed its positivity check."""


class NumericDegenerateError(NumericError):
    """A control-limit formula received degenerate inputs."""
