"""Exception types shared across the package."""


class NonholoError(Exception):
    """Base class for package errors."""


class ConfigError(NonholoError):
    """Invalid system definition: bad config text, non-SPD metric, rank
    deficient constraints at the reference point, and similar."""


class ParseError(ConfigError):
    """Expression or config syntax error, carrying a byte offset."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


class NumericalError(NonholoError):
    """Singular linear algebra or a failed numerical operation."""


class ChartError(NumericalError):
    """The frozen elimination pattern for the constraint matrix became
    invalid; the chart no longer covers this region."""


class PreconditionError(NumericalError):
    """A stated hypothesis of a residual check does not hold at the
    evaluation point (off the constraint image, non-symplectic map, ...)."""


class InvarianceError(NumericalError):
    """A sampled fiber audit found a quantity that does not push down."""
