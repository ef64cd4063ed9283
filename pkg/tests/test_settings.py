from __future__ import annotations

import pytest

from cli.config import Settings
from core.errors import ConfigError


def test_defaults(monkeypatch: pytest.MonkeyPatch) -> None:
    for key in ("THREADS", "LOG_LEVEL", "LOG_FORMAT", "DATA_DIR"):
        monkeypatch.delenv(f"QAPFORGE_{key}", raising=False)
    assert Settings.from_env() == Settings()


def test_environment_overrides(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("QAPFORGE_THREADS", "4")
    monkeypatch.setenv("QAPFORGE_LOG_LEVEL", "debug")
    monkeypatch.setenv("QAPFORGE_LOG_FORMAT", "TEXT")
    monkeypatch.setenv("QAPFORGE_DATA_DIR", "/data")
    settings = Settings.from_env()
    assert settings == Settings(threads=4, log_level="DEBUG", log_format="text", data_dir="/data")


@pytest.mark.parametrize("raw", ["0", "-2", "many"])
def test_bad_thread_count(monkeypatch: pytest.MonkeyPatch, raw: str) -> None:
    monkeypatch.setenv("QAPFORGE_THREADS", raw)
    with pytest.raises(ConfigError, match="QAPFORGE_THREADS") as info:
        Settings.from_env()
    assert info.value.fields == ("QAPFORGE_THREADS",)


def test_bad_log_format(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("QAPFORGE_THREADS", raising=False)
    monkeypatch.setenv("QAPFORGE_LOG_FORMAT", "yaml")
    with pytest.raises(ConfigError, match="'json' or 'text'"):
        Settings.from_env()
