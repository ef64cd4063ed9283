from __future__ import annotations

import logging
from pathlib import Path

from cli.config import Settings
from cli.logging import get_logger, setup_logging
from core.config import build_train_config, read_config_file
from core.trainer import TrainResult, train


def run_training_impl(
    config_path: str,
    *,
    settings: Settings,
    logger: logging.Logger,
    threads: int,
    resume_from: str | None = None,
) -> TrainResult:
    """Training run with explicit injected deps.

    Dataset paths in the config file are resolved against
    ``settings.data_dir``; ``resume_from`` overrides the config's own entry.
    """
    values = read_config_file(config_path)
    if resume_from is not None:
        values["resume_from"] = resume_from
    config = build_train_config(values, data_dir=settings.data_dir, source=config_path)
    logger.info(
        "training config loaded",
        extra={"path": config_path, "n": config.n, "epoch": config.epochs},
    )
    result = train(config, threads=threads)
    logger.info(
        "training complete",
        extra={
            "path": str(Path(config.checkpoint_path)),
            "epoch": result.best.epoch,
            "val_gap": result.best.metric,
        },
    )
    return result


def run_training(config_path: str, *, threads: int | None = None) -> TrainResult:
    """Entry point for scripted runs. Loads deps from env and delegates to the impl."""
    settings = Settings.from_env()
    setup_logging(settings.log_level, settings.log_format)
    return run_training_impl(
        config_path,
        settings=settings,
        logger=get_logger(__name__),
        threads=threads if threads is not None else settings.threads,
    )
