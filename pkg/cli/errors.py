from __future__ import annotations

import logging
from typing import Final

from core.errors import (
    AlignmentError,
    CheckpointCorruptionError,
    CompatibilityError,
    ConfigError,
    DatasetCorruptionError,
    NumericalFailureError,
    QapError,
    SizeLimitError,
    UsageError,
)

EXIT_OK: Final[int] = 0
EXIT_FAILURE: Final[int] = 1
EXIT_USAGE: Final[int] = 2
EXIT_DATA: Final[int] = 3
EXIT_LIMIT: Final[int] = 4
EXIT_NUMERICAL: Final[int] = 5

_EXIT_CODES: Final[tuple[tuple[type[QapError], int], ...]] = (
    (UsageError, EXIT_USAGE),
    (ConfigError, EXIT_USAGE),
    (DatasetCorruptionError, EXIT_DATA),
    (CheckpointCorruptionError, EXIT_DATA),
    (AlignmentError, EXIT_DATA),
    (SizeLimitError, EXIT_LIMIT),
    (CompatibilityError, EXIT_LIMIT),
    (NumericalFailureError, EXIT_NUMERICAL),
)


def exit_code_for(exc: BaseException) -> int:
    """Process exit code for an error raised by a command."""
    for kind, code in _EXIT_CODES:
        if isinstance(exc, kind):
            return code
    if isinstance(exc, OSError):
        return EXIT_DATA
    return EXIT_FAILURE


def report_error(exc: BaseException, logger: logging.Logger) -> int:
    """Log ``exc`` with its type and return the exit code to use."""
    code = exit_code_for(exc)
    extra: dict[str, object] = {"error_type": type(exc).__name__, "exit_code": code}
    if isinstance(exc, NumericalFailureError):
        extra["diagnostics"] = exc.diagnostics
    logger.error(str(exc), extra=extra)
    return code
