from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from core.checkpoint import (
    capture,
    load_checkpoint,
    restore_critic,
    restore_policy,
    save_checkpoint,
)
from core.config import PolicyConfig, TrainConfig
from core.critic import CriticModel
from core.errors import CheckpointCorruptionError, CompatibilityError
from core.inference import solve_greedy
from core.nn import AdamConfig, AdamState, adam_step
from core.policy import PolicyModel
from core.rng import make_rng
from tests.helpers import make_instance


def _config(n: int = 4) -> TrainConfig:
    return TrainConfig(
        n=n,
        train_path="train.qapds",
        validation_path="val.qapds",
        policy=PolicyConfig(d_k=6, d_i=5, decoder="attention"),
    )


def _saved(tmp_path: Path) -> tuple[Path, PolicyModel, CriticModel]:
    config = _config()
    policy = PolicyModel(config.policy, 4, rng=make_rng(1))
    critic = CriticModel(4, rng=make_rng(2))
    policy_opt = AdamState()
    critic_opt = AdamState()
    adam_step(policy.store, policy.store.snapshot(), policy_opt, AdamConfig())
    adam_step(critic.store, critic.store.snapshot(), critic_opt, AdamConfig())
    ckpt = capture(
        config,
        policy,
        critic,
        epoch=3,
        metric=0.125,
        policy_optimizer=policy_opt,
        critic_optimizer=critic_opt,
    )
    path = tmp_path / "model.qapckpt"
    save_checkpoint(path, ckpt)
    return path, policy, critic


def test_manifest_header(tmp_path: Path) -> None:
    path, _, _ = _saved(tmp_path)
    head = path.read_bytes().split(b"\n---\n", 1)[0].decode("utf-8").split("\n")
    assert head[0] == "qapckpt v1"
    assert head[1].startswith("config {")
    assert head[2:5] == ["epoch 3", "metric 0.125", "optimizer_step 1"]
    assert head[5].startswith("tensor policy/conv.0.weight 6x2 0 12")


def test_load_restores_everything(tmp_path: Path) -> None:
    path, policy, critic = _saved(tmp_path)
    ckpt = load_checkpoint(path, expected_n=4)
    assert ckpt.epoch == 3
    assert ckpt.metric == 0.125
    assert ckpt.config == _config()
    assert ckpt.policy_optimizer.step == 1
    for name, tensor in policy.store.items():
        assert np.array_equal(ckpt.policy[name], tensor.data)
        assert name in ckpt.policy_optimizer.m
    for name, tensor in critic.store.items():
        assert np.array_equal(ckpt.critic[name], tensor.data)
    assert set(ckpt.critic_optimizer.v) == set(critic.store)


def test_restored_policy_decodes_identically(tmp_path: Path) -> None:
    path, policy, critic = _saved(tmp_path)
    ckpt = load_checkpoint(path)
    inst = make_instance(4, seed=9)
    assert solve_greedy(restore_policy(ckpt), inst) == solve_greedy(policy, inst)
    restored = restore_critic(ckpt)
    assert np.array_equal(restored.store["critic.0.bias"].data, critic.store["critic.0.bias"].data)


def test_size_mismatch_is_incompatible(tmp_path: Path) -> None:
    path, _, _ = _saved(tmp_path)
    with pytest.raises(CompatibilityError, match="n=4, expected n=5"):
        load_checkpoint(path, expected_n=5)


def test_truncated_blob_is_corrupt(tmp_path: Path) -> None:
    path, _, _ = _saved(tmp_path)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(CheckpointCorruptionError):
        load_checkpoint(path)


def test_wrong_magic_is_corrupt(tmp_path: Path) -> None:
    path, _, _ = _saved(tmp_path)
    path.write_bytes(b"qapckpt v9" + path.read_bytes()[len(b"qapckpt v1") :])
    with pytest.raises(CheckpointCorruptionError, match="not a qapckpt v1 file"):
        load_checkpoint(path)


def test_missing_separator_is_corrupt(tmp_path: Path) -> None:
    path = tmp_path / "broken.qapckpt"
    path.write_bytes(b"qapckpt v1\nepoch 1\n")
    with pytest.raises(CheckpointCorruptionError, match="separator"):
        load_checkpoint(path)


def test_missing_file_is_corrupt(tmp_path: Path) -> None:
    with pytest.raises(CheckpointCorruptionError, match="not found"):
        load_checkpoint(tmp_path / "absent.qapckpt")
