"""Shared builders for tiny instances, policies and training runs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from numpy.typing import DTypeLike

from core.config import PolicyConfig
from core.dataset import generate_dataset, save_dataset
from core.policy import PolicyModel
from core.qap import QapInstance, generate_instance
from core.rng import make_rng


def make_instance(n: int, seed: int = 0) -> QapInstance:
    return generate_instance(make_rng(seed), n)


def make_policy(
    n: int,
    config: PolicyConfig | None = None,
    *,
    seed: int = 0,
    dtype: DTypeLike = np.float64,
) -> PolicyModel:
    cfg = config if config is not None else PolicyConfig(d_k=8, d_i=8)
    return PolicyModel(cfg, n, rng=make_rng(seed, 0), dtype=dtype)


def write_dataset(path: Path, *, n: int, count: int, seed: int) -> Path:
    header, instances = generate_dataset(seed, n, count)
    save_dataset(path, header, instances)
    return path


def write_train_config(
    tmp_path: Path,
    *,
    n: int = 4,
    train_count: int = 6,
    val_count: int = 3,
    extra: dict[str, str] | None = None,
) -> Path:
    """Tiny training setup: datasets plus a flat config file in ``tmp_path``."""
    write_dataset(tmp_path / "train.qapds", n=n, count=train_count, seed=42)
    write_dataset(tmp_path / "val.qapds", n=n, count=val_count, seed=43)
    values = {
        "n": str(n),
        "train_path": str(tmp_path / "train.qapds"),
        "validation_path": str(tmp_path / "val.qapds"),
        "checkpoint_path": str(tmp_path / "best.qapckpt"),
        "checkpoint_dir": str(tmp_path / "checkpoints"),
        "metrics_path": str(tmp_path / "metrics.log"),
        "epochs": "1",
        "batch_size": "3",
        "d_k": "8",
        "d_i": "8",
        "seed": "7",
    }
    values.update(extra or {})
    cfg = tmp_path / "train.cfg"
    cfg.write_text(
        "# tiny run\n" + "".join(f"{k} = {v}\n" for k, v in values.items()),
        encoding="utf-8",
    )
    return cfg
