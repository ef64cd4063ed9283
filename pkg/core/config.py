"""Validated model and training configuration plus the flat config-file reader."""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from core.errors import ConfigError

Precision = Literal["float32", "float64"]


class PolicyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    d_k: int = Field(ge=1, default=128)
    d_i: int = Field(ge=1, default=128)
    gcn_layers: int = Field(ge=3, le=3, default=3)
    conv_layers: int = Field(ge=3, le=3, default=3)
    decoder: Literal["attention", "mlp"] = "attention"
    attention_activation: Literal["identity", "tanh"] = "identity"
    gru_sharing: Literal["shared", "per_chain"] = "shared"


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int = Field(ge=2)
    train_path: str
    validation_path: str
    checkpoint_path: str = "best.qapckpt"
    checkpoint_dir: str = "checkpoints"
    metrics_path: str = "metrics.log"
    epochs: int = Field(ge=1, default=20)
    batch_size: int = Field(ge=1, default=50)
    dropout: float = Field(ge=0.0, lt=1.0, default=0.1)
    gamma: float = Field(gt=0.0, le=1.0, default=1.0)
    alpha: float = Field(ge=0.0, default=0.5)
    beta: float = Field(ge=0.0, default=0.01)
    lr: float = Field(gt=0.0, default=1e-4)
    seed: int = Field(ge=0, lt=2**64, default=0)
    precision: Precision = "float32"
    max_train_instances: int | None = Field(ge=1, default=None)
    resume_from: str | None = None
    policy: PolicyConfig = PolicyConfig()


def _config_error(exc: ValidationError, source: str) -> ConfigError:
    fields = tuple(".".join(str(part) for part in err["loc"]) for err in exc.errors())
    problems = "; ".join(
        f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
    )
    return ConfigError(f"{source}: {problems}", fields=fields)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    src = Path(path)
    if not src.is_file():
        raise ConfigError(f"config file not found: {src}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(src.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{src}:{lineno}: expected 'key = value'", fields=(key,))
        if key in values:
            raise ConfigError(f"{src}:{lineno}: duplicate key {key!r}", fields=(key,))
        values[key] = value.strip()
    return values


def build_train_config(
    values: dict[str, str], *, data_dir: str | Path | None = None, source: str = "config"
) -> TrainConfig:
    """Split flat values into policy and training fields and validate both.

    Relative dataset paths are resolved against ``data_dir`` when given.
    """
    policy_keys = set(PolicyConfig.model_fields)
    policy_values: dict[str, object] = {}
    train_values: dict[str, object] = {}
    for key, value in values.items():
        target = policy_values if key in policy_keys else train_values
        target[key] = None if value == "" else value
    if data_dir is not None:
        base = Path(data_dir)
        for key in ("train_path", "validation_path"):
            raw = train_values.get(key)
            if isinstance(raw, str) and not Path(raw).is_absolute():
                train_values[key] = str(base / raw)
    try:
        policy = PolicyConfig.model_validate(policy_values)
        return TrainConfig.model_validate({**train_values, "policy": policy})
    except ValidationError as exc:
        raise _config_error(exc, source) from exc


def load_train_config(path: str | Path, *, data_dir: str | Path | None = None) -> TrainConfig:
    return build_train_config(read_config_file(path), data_dir=data_dir, source=str(path))


def train_config_from_json(text: str) -> TrainConfig:
    try:
        return TrainConfig.model_validate_json(text)
    except ValidationError as exc:
        raise _config_error(exc, "embedded config") from exc
