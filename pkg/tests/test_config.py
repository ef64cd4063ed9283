from __future__ import annotations

from pathlib import Path

import pytest

from core.config import (
    PolicyConfig,
    TrainConfig,
    build_train_config,
    load_train_config,
    read_config_file,
    train_config_from_json,
)
from core.errors import ConfigError


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.cfg"
    path.write_text(text, encoding="utf-8")
    return path


def test_reader_skips_comments_and_blanks(tmp_path: Path) -> None:
    path = _write(tmp_path, "# run\n\nn = 10\n  lr=0.001  \nresume_from =\n")
    assert read_config_file(path) == {"n": "10", "lr": "0.001", "resume_from": ""}


def test_duplicate_key_is_rejected(tmp_path: Path) -> None:
    path = _write(tmp_path, "n = 10\nn = 20\n")
    with pytest.raises(ConfigError, match=":2: duplicate key 'n'") as info:
        read_config_file(path)
    assert info.value.fields == ("n",)


def test_line_without_equals_is_rejected(tmp_path: Path) -> None:
    path = _write(tmp_path, "epochs 10\n")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        read_config_file(path)


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="not found"):
        read_config_file(tmp_path / "absent.cfg")


def test_values_are_split_between_policy_and_training(tmp_path: Path) -> None:
    path = _write(
        tmp_path,
        "n = 10\ntrain_path = t.qapds\nvalidation_path = v.qapds\n"
        "d_k = 32\ndecoder = mlp\nepochs = 3\nresume_from =\n",
    )
    config = load_train_config(path)
    assert config.n == 10
    assert config.epochs == 3
    assert config.resume_from is None
    assert config.policy == PolicyConfig(d_k=32, decoder="mlp")
    assert config.batch_size == 50
    assert config.gamma == 1.0


def test_relative_dataset_paths_resolve_against_data_dir(tmp_path: Path) -> None:
    values = {"n": "4", "train_path": "t.qapds", "validation_path": str(tmp_path / "v.qapds")}
    config = build_train_config(values, data_dir=tmp_path / "data")
    assert config.train_path == str(tmp_path / "data" / "t.qapds")
    assert config.validation_path == str(tmp_path / "v.qapds")


def test_invalid_values_name_their_fields() -> None:
    values = {"n": "1", "train_path": "t", "validation_path": "v", "epochs": "0"}
    with pytest.raises(ConfigError) as info:
        build_train_config(values, source="bad.cfg")
    assert set(info.value.fields) == {"n", "epochs"}
    assert str(info.value).startswith("bad.cfg: ")


def test_layer_counts_are_pinned() -> None:
    values = {"n": "4", "train_path": "t", "validation_path": "v", "gcn_layers": "4"}
    with pytest.raises(ConfigError) as info:
        build_train_config(values)
    assert info.value.fields == ("gcn_layers",)


def test_unknown_key_is_rejected() -> None:
    with pytest.raises(ConfigError) as info:
        build_train_config({"n": "4", "train_path": "t", "validation_path": "v", "lrate": "1"})
    assert info.value.fields == ("lrate",)


def test_embedded_json_round_trip() -> None:
    config = TrainConfig(n=5, train_path="t", validation_path="v", dropout=0.0)
    assert train_config_from_json(config.model_dump_json()) == config
    with pytest.raises(ConfigError, match="embedded config"):
        train_config_from_json('{"n": 1}')


@pytest.mark.parametrize(
    ("name", "decoder"),
    [("smoke.cfg", "attention"), ("ablation.cfg", "attention"), ("ablation_mlp.cfg", "mlp")],
)
def test_shipped_configs_validate(name: str, decoder: str) -> None:
    path = Path(__file__).resolve().parents[1] / "configs" / name
    config = load_train_config(path, data_dir="/data")
    assert config.train_path.startswith("/data/")
    assert config.policy.gcn_layers == 3
    assert config.policy.decoder == decoder
