"""Exception taxonomy shared by all backflow modules."""


class BackflowError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(BackflowError):
    """Operands have incompatible or invalid dimensions."""


class ShapeError(BackflowError):
    """A matrix violates a structural requirement (e.g. not Hermitian)."""


class ParameterError(BackflowError):
    """A scalar parameter is outside its admissible range."""


class DomainError(BackflowError):
    """An input is outside the mathematical domain of the operation."""


class EnsembleError(BackflowError):
    """A weighted state ensemble violates its invariants."""


class RepresentationError(BackflowError):
    """A channel representation cannot be produced (e.g. Kraus of a non-CP map)."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class InvertibilityError(BackflowError):
    """A map is numerically singular where an inverse is required."""

    def __init__(self, message, smallest_singular_value=None):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class IntegrationError(BackflowError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class SingularRateError(BackflowError):
    """Rate reconstruction hit a vanishing channel eigenvalue (non-invertible instant)."""


class InterpolationError(BackflowError):
    """A channel grid was queried off its stored time points."""


class AnalysisError(BackflowError):
    """An analysis cannot produce a meaningful verdict (e.g. nothing left after exclusions)."""


class InconsistencyError(BackflowError):
    """Two criteria that must agree produced contradictory verdicts."""


class ExpressionError(BackflowError):
    """Expression source failed to parse."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class EvaluationError(BackflowError):
    """Expression evaluation produced a non-finite value."""


class ConfigError(BackflowError):
    """Scenario configuration is invalid."""
