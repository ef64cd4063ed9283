from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from typing import Final

from cli.config import LogFormat

UTC = timezone.utc  # datetime.UTC alias is Python 3.11+

# contextual fields copied from ``extra=`` when present
_CONTEXT_FIELDS: Final[tuple[str, ...]] = (
    "epoch",
    "batch",
    "method",
    "instance",
    "path",
    "n",
    "seconds",
    "loss",
    "val_gap",
    "error_type",
    "exit_code",
    "diagnostics",
)

_TEXT_FORMAT: Final[str] = "%(asctime)s %(levelname)s %(name)s: %(message)s"
_HANDLER_NAME: Final[str] = "qapforge"


class StructuredFormatter(logging.Formatter):
    """JSON formatter for structured logs with stable keys."""

    def format(self, record: logging.LogRecord) -> str:
        data: dict[str, object] = {
            "timestamp": datetime.fromtimestamp(record.created, tz=UTC).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }
        for key in _CONTEXT_FIELDS:
            if hasattr(record, key):
                data[key] = getattr(record, key)
        return json.dumps(data, ensure_ascii=False, default=str)


def setup_logging(level: str = "INFO", fmt: LogFormat = "json") -> None:
    """Configure root logging on stderr; repeated calls replace, never duplicate."""
    root = logging.getLogger()
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
    for existing in [h for h in root.handlers if h.get_name() == _HANDLER_NAME]:
        root.removeHandler(existing)
    handler = logging.StreamHandler()
    handler.set_name(_HANDLER_NAME)
    if fmt == "json":
        handler.setFormatter(StructuredFormatter())
    else:
        handler.setFormatter(logging.Formatter(_TEXT_FORMAT))
    root.addHandler(handler)


def get_logger(name: str) -> logging.Logger:
    """Return module logger."""
    return logging.getLogger(name)
