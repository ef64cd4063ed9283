from __future__ import annotations

from collections.abc import Mapping


class QapError(Exception):
    """Base class for every error raised by the engine."""


class InvalidInputError(QapError, ValueError):
    """Raised when an argument violates a documented precondition."""


class SizeLimitError(QapError):
    """Raised when a request exceeds a hard size guard (e.g. exhaustive search)."""

    def __init__(self, *, n: int, limit: int) -> None:
        super().__init__(f"instance size {n} exceeds limit {limit}")
        self.n = n
        self.limit = limit


class ShapeError(QapError, ValueError):
    """Raised when tensor shapes are incompatible for an operation."""


class DegenerateMaskError(QapError):
    """Raised when a mask leaves no allowed entry."""


class IllegalActionError(QapError):
    """Raised when an action is not allowed in the current state."""


class TerminalStateError(QapError):
    """Raised when an operation needs a non-terminal state (or the reverse)."""


class ConsistencyError(QapError):
    """Raised when paired structures (parameters, gradients, state) disagree."""


class NumericalFailureError(QapError):
    """Raised when a loss or gradient becomes non-finite.

    Carries a diagnostics mapping so the caller can log what went wrong
    before aborting.
    """

    def __init__(self, message: str, *, diagnostics: Mapping[str, object]) -> None:
        super().__init__(message)
        self.diagnostics = dict(diagnostics)


class DatasetCorruptionError(QapError):
    """Raised when a dataset file disagrees with its own header."""

    def __init__(self, message: str, *, path: str, line: int | None = None) -> None:
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


class DatasetParseError(DatasetCorruptionError):
    """Raised when a dataset line cannot be parsed."""


class CheckpointCorruptionError(QapError):
    """Raised when a checkpoint manifest and blob do not match."""


class CompatibilityError(QapError):
    """Raised when a model and an instance (or dataset) disagree on size."""


class AlignmentError(QapError):
    """Raised when two result files do not cover the same instances."""


class ConfigError(QapError):
    """Raised for invalid or incomplete configuration.

    ``fields`` names the offending configuration keys when known.
    """

    def __init__(self, message: str, *, fields: tuple[str, ...] = ()) -> None:
        super().__init__(message)
        self.fields = fields


class UsageError(QapError):
    """Raised for invalid command-line usage."""
