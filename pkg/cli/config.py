from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Literal

from core.errors import ConfigError

LogFormat = Literal["json", "text"]


@dataclass(frozen=True)
class Settings:
    """Process settings loaded from the environment in a type-safe, framework-free way."""

    threads: int = 1
    log_level: str = "INFO"
    log_format: LogFormat = "json"
    data_dir: str = "."

    @staticmethod
    def from_env() -> Settings:
        prefix = "QAPFORGE_"
        threads_raw = os.getenv(f"{prefix}THREADS", "1").strip() or "1"
        if not threads_raw.isdigit() or int(threads_raw) < 1:
            raise ConfigError(
                f"{prefix}THREADS must be a positive integer, got {threads_raw!r}",
                fields=(f"{prefix}THREADS",),
            )
        log_level = os.getenv(f"{prefix}LOG_LEVEL", "INFO").strip().upper() or "INFO"
        fmt_raw = os.getenv(f"{prefix}LOG_FORMAT", "json").strip().lower() or "json"
        if fmt_raw == "json":
            log_format: LogFormat = "json"
        elif fmt_raw == "text":
            log_format = "text"
        else:
            raise ConfigError(
                f"{prefix}LOG_FORMAT must be 'json' or 'text', got {fmt_raw!r}",
                fields=(f"{prefix}LOG_FORMAT",),
            )
        data_dir = os.getenv(f"{prefix}DATA_DIR", ".").strip() or "."
        return Settings(
            threads=int(threads_raw),
            log_level=log_level,
            log_format=log_format,
            data_dir=data_dir,
        )
