"""Single-file checkpoints: a text manifest, a ``---`` line, then a float32 blob.

Manifest lines, in order::

    qapckpt v1
    config <TrainConfig as JSON>
    epoch <int>
    metric <real>
    optimizer_step <int>
    tensor <name> <shape> <offset> <count>     (one per tensor, blob order)

``shape`` is ``x``-joined dimensions (``-`` for a scalar); ``offset`` and
``count`` are in float32 elements. The blob is little-endian float32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Final

import numpy as np

from core.autodiff import Array
from core.config import TrainConfig, train_config_from_json
from core.critic import CriticModel
from core.errors import CheckpointCorruptionError, CompatibilityError, ConfigError
from core.nn import AdamState
from core.policy import PolicyModel
from core.rng import make_rng

_MAGIC: Final[str] = "qapckpt v1"
_SEPARATOR: Final[bytes] = b"\n---\n"
_BLOB_DTYPE: Final[np.dtype[np.float32]] = np.dtype("<f4")


@dataclass(frozen=True, eq=False)
class Checkpoint:
    config: TrainConfig
    policy: dict[str, Array]
    critic: dict[str, Array]
    epoch: int
    metric: float
    policy_optimizer: AdamState = field(default_factory=AdamState)
    critic_optimizer: AdamState = field(default_factory=AdamState)


def capture(
    config: TrainConfig,
    policy: PolicyModel,
    critic: CriticModel,
    *,
    epoch: int,
    metric: float,
    policy_optimizer: AdamState,
    critic_optimizer: AdamState,
) -> Checkpoint:
    return Checkpoint(
        config=config,
        policy=policy.store.snapshot(),
        critic=critic.store.snapshot(),
        epoch=epoch,
        metric=metric,
        policy_optimizer=_copy_state(policy_optimizer),
        critic_optimizer=_copy_state(critic_optimizer),
    )


def _copy_state(state: AdamState) -> AdamState:
    return AdamState(
        step=state.step,
        m={k: v.copy() for k, v in state.m.items()},
        v={k: v.copy() for k, v in state.v.items()},
    )


def _named_tensors(ckpt: Checkpoint) -> list[tuple[str, Array]]:
    out: list[tuple[str, Array]] = []
    out.extend((f"policy/{k}", v) for k, v in ckpt.policy.items())
    out.extend((f"critic/{k}", v) for k, v in ckpt.critic.items())
    for label, state in (("policy", ckpt.policy_optimizer), ("critic", ckpt.critic_optimizer)):
        out.extend((f"adam_m/{label}/{k}", v) for k, v in state.m.items())
        out.extend((f"adam_v/{label}/{k}", v) for k, v in state.v.items())
    return out


def _shape_text(shape: tuple[int, ...]) -> str:
    return "x".join(str(d) for d in shape) if shape else "-"


def _parse_shape(text: str) -> tuple[int, ...]:
    if text == "-":
        return ()
    return tuple(int(part) for part in text.split("x"))


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    if ckpt.policy_optimizer.step != ckpt.critic_optimizer.step:
        raise CheckpointCorruptionError("policy and critic optimizers disagree on step count")
    lines = [
        _MAGIC,
        f"config {ckpt.config.model_dump_json()}",
        f"epoch {ckpt.epoch}",
        f"metric {ckpt.metric!r}",
        f"optimizer_step {ckpt.policy_optimizer.step}",
    ]
    chunks: list[bytes] = []
    offset = 0
    for name, value in _named_tensors(ckpt):
        arr = np.ascontiguousarray(value, dtype=_BLOB_DTYPE)
        lines.append(f"tensor {name} {_shape_text(arr.shape)} {offset} {arr.size}")
        chunks.append(arr.tobytes())
        offset += arr.size
    dest = Path(path)
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes("\n".join(lines).encode("utf-8") + _SEPARATOR + b"".join(chunks))


def _field(lines: list[str], index: int, key: str, where: str) -> str:
    if index >= len(lines) or not lines[index].startswith(f"{key} "):
        raise CheckpointCorruptionError(f"{where}: expected '{key}' at manifest line {index + 1}")
    return lines[index][len(key) + 1 :]


def load_checkpoint(path: str | Path, *, expected_n: int | None = None) -> Checkpoint:
    src = Path(path)
    where = str(src)
    if not src.is_file():
        raise CheckpointCorruptionError(f"checkpoint not found: {where}")
    raw = src.read_bytes()
    head, sep, blob = raw.partition(_SEPARATOR)
    if not sep:
        raise CheckpointCorruptionError(f"{where}: missing manifest separator")
    try:
        lines = head.decode("utf-8").split("\n")
    except UnicodeDecodeError as exc:
        raise CheckpointCorruptionError(f"{where}: manifest is not UTF-8") from exc
    if not lines or lines[0] != _MAGIC:
        raise CheckpointCorruptionError(f"{where}: not a qapckpt v1 file")
    try:
        config = train_config_from_json(_field(lines, 1, "config", where))
        epoch = int(_field(lines, 2, "epoch", where))
        metric = float(_field(lines, 3, "metric", where))
        step = int(_field(lines, 4, "optimizer_step", where))
    except (ValueError, ConfigError) as exc:
        raise CheckpointCorruptionError(f"{where}: bad manifest header ({exc})") from exc

    if expected_n is not None and config.n != expected_n:
        raise CompatibilityError(
            f"{where}: checkpoint was trained for n={config.n}, expected n={expected_n}"
        )
    if len(blob) % _BLOB_DTYPE.itemsize != 0:
        raise CheckpointCorruptionError(f"{where}: blob length {len(blob)} is not a float32 multiple")
    values = np.frombuffer(blob, dtype=_BLOB_DTYPE)

    tensors: dict[str, Array] = {}
    expected_offset = 0
    for lineno, line in enumerate(lines[5:], start=6):
        parts = line.split(" ")
        if len(parts) != 5 or parts[0] != "tensor":
            raise CheckpointCorruptionError(f"{where}: malformed tensor line {lineno}")
        name = parts[1]
        try:
            shape = _parse_shape(parts[2])
            offset, count = int(parts[3]), int(parts[4])
        except ValueError as exc:
            raise CheckpointCorruptionError(f"{where}: malformed tensor line {lineno}") from exc
        if offset != expected_offset or count != math.prod(shape):
            raise CheckpointCorruptionError(f"{where}: tensor {name} has inconsistent layout")
        expected_offset += count
        if expected_offset > values.size:
            raise CheckpointCorruptionError(f"{where}: blob is shorter than the manifest")
        tensors[name] = values[offset : offset + count].reshape(shape).astype(np.float32)
    if expected_offset != values.size:
        raise CheckpointCorruptionError(
            f"{where}: blob holds {values.size} values, manifest declares {expected_offset}"
        )

    def section(prefix: str) -> dict[str, Array]:
        return {k[len(prefix) :]: v for k, v in tensors.items() if k.startswith(prefix)}

    return Checkpoint(
        config=config,
        policy=section("policy/"),
        critic=section("critic/"),
        epoch=epoch,
        metric=metric,
        policy_optimizer=AdamState(
            step=step, m=section("adam_m/policy/"), v=section("adam_v/policy/")
        ),
        critic_optimizer=AdamState(
            step=step, m=section("adam_m/critic/"), v=section("adam_v/critic/")
        ),
    )


def restore_policy(ckpt: Checkpoint, *, dtype: np.dtype[np.floating] | None = None) -> PolicyModel:
    """Rebuild the policy described by ``ckpt`` and load its parameters."""
    target = dtype if dtype is not None else np.dtype(ckpt.config.precision)
    model = PolicyModel(ckpt.config.policy, ckpt.config.n, rng=make_rng(0), dtype=target)
    model.store.load(ckpt.policy)
    return model


def restore_critic(ckpt: Checkpoint, *, dtype: np.dtype[np.floating] | None = None) -> CriticModel:
    target = dtype if dtype is not None else np.dtype(ckpt.config.precision)
    model = CriticModel(ckpt.config.n, rng=make_rng(0), dtype=target)
    model.store.load(ckpt.critic)
    return model
