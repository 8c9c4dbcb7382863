"""Exception types shared across the package."""


class NsfmError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(NsfmError, ValueError):
    """Operands have inconsistent or unsupported dimensions."""


class ConfigError(NsfmError, ValueError):
    """A configuration value is out of range or unknown."""


class DomainError(NsfmError, ValueError):
    """A numeric argument lies outside the function's domain."""


class FormatError(NsfmError, ValueError):
    """An on-disk artifact does not match its binary format.

    ``offset`` is the byte offset at which the problem was detected,
    when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class RankError(NsfmError, ValueError):
    """A matrix is numerically rank deficient where full rank is required."""


class DataError(NsfmError, ValueError):
    """Input data is degenerate (e.g. an all-zero dataset)."""


class NumericError(NsfmError, ArithmeticError):
    """A computation produced non-finite values.

    ``index`` identifies the offending step or batch element when known.
    """

    def __init__(self, message, index=None):
        if index is not None:
            message = f"{message} (index {index})"
        super().__init__(message)
        self.index = index


class TrainingDivergedError(NumericError):
    """Training loss exceeded the divergence threshold or went non-finite."""
