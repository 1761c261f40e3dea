"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`WaicError`.
Value-type problems additionally derive from :class:`ValueError` so callers
that only know the builtin still catch them.
"""


class WaicError(Exception):
    """Base class for all package errors."""


class DomainError(WaicError, ValueError):
    """An input lies outside the domain of an operation (NaN, +inf, bad scale)."""


class InsufficientSamplesError(WaicError, ValueError):
    """Too few samples to finalize (sample variance needs at least two)."""


class IntegrityError(WaicError, ValueError):
    """Shapes, counts or metadata disagree with the state they are applied to."""


class NumericalError(WaicError, ArithmeticError):
    """A density or accumulator produced NaN or another unusable value."""


class CorruptCheckpointError(WaicError, ValueError):
    """A checkpoint blob failed version, length or digest validation."""


class PartitionError(WaicError, ValueError):
    """Base class for invalid data partitions."""


class DuplicateNodeError(PartitionError):
    pass


class IncompletePartitionError(PartitionError):
    pass


class UnknownNodeError(PartitionError):
    pass


class MissingParameterError(WaicError, KeyError):
    """A node's parent has no value in the supplied assignment."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ModelConfigurationError(WaicError, ValueError):
    """Model/dataset/mode combination that cannot be run."""


class StreamFormatError(WaicError, ValueError):
    """Malformed stream-ingestion file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
