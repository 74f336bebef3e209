"""Exception types shared across the package."""


class ZeroVector(ValueError):
    """A vector that must be normalized has (numerically) zero norm."""


class BatchTooLarge(ValueError):
    """Requested batch size exceeds the ensemble size."""


class NonFinite(ArithmeticError):
    """A loss or gradient became NaN/Inf during simulation."""


class TooFewSamples(ValueError):
    """Not enough samples for the requested estimate."""


class NonPositiveEdgeLength(ArithmeticError):
    """Total k-NN edge length is zero (all samples identical)."""


class EmptyInput(ValueError):
    """An operation received an empty series."""


class SeriesTooShort(ValueError):
    """Series too short for the requested finite-difference stencil."""


class NonPositiveInput(ValueError):
    """Power-law fitting requires strictly positive coordinates."""


class DegenerateX(ValueError):
    """All x values coincide; the fit slope is undetermined."""


class DegeneratePoint(ArithmeticError):
    """Closed-form expression evaluated where its denominator vanishes."""


class DimensionMismatch(ValueError):
    """Operands do not share the required dimension."""


class DomainViolation(ValueError):
    """Argument outside the stated domain of a closed-form expression."""


class InvalidConfig(ValueError):
    """Experiment configuration failed validation."""


class MissingData(RuntimeError):
    """An analysis input (file or series) is absent or insufficient."""
