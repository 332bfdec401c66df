"""Exception types shared across the toolkit."""


class InterdivError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(InterdivError):
    """A required column is missing or the schema is inconsistent."""


class EmptyDataError(InterdivError):
    """No usable rows remain after parsing."""


class DegenerateAttributeError(InterdivError):
    """A protected column has a single observed value; groups collapse."""


class SplitError(InterdivError):
    """A train/test partition would be empty."""


class ValidationError(InterdivError):
    """Invalid construction arguments (control points, parameters, ...)."""


class InputError(InterdivError):
    """Invalid runtime input (non-finite values, length mismatch, ...)."""


class UndefinedMetricError(InterdivError):
    """The requested measure is undefined for this group structure."""


class DegenerateObjectiveError(InterdivError):
    """The objective produced no usable curvature (all-zero Hessians)."""


class ParameterError(InterdivError):
    """Approximation or boosting parameters outside their valid range."""


class InternalError(InterdivError):
    """Invariant violated inside the library; indicates a bug."""
