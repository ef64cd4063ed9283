from __future__ import annotations

import numpy as np
import pytest

from core.autodiff import Tensor, constant, gradient_check, total
from core.critic import CriticModel, encode_state, input_width, state_values, value
from core.env import initial_state, rollout
from core.errors import CompatibilityError
from core.rng import make_rng
from tests.helpers import make_instance


def test_encoding_layout_and_sentinels() -> None:
    inst = make_instance(3)
    state, _ = rollout(inst, [2, 0, 1])
    encoded = encode_state(inst, state)
    assert encoded.shape == (input_width(3),)
    assert np.array_equal(encoded[:9], inst.flows.ravel())
    assert np.array_equal(encoded[9:18], inst.distances.ravel())
    assert encoded[18:].tolist() == pytest.approx([2 / 3, 0.0, 1 / 3, -1.0, -1.0, -1.0])


def test_layer_shapes() -> None:
    critic = CriticModel(4, rng=make_rng(0))
    assert critic.store["critic.0.weight"].shape == (40, 512)
    assert critic.store["critic.1.weight"].shape == (512, 1024)
    assert critic.store["critic.2.weight"].shape == (1024, 1)


def test_batched_values_match_single_values() -> None:
    inst = make_instance(4)
    critic = CriticModel(4, rng=make_rng(1), dtype=np.float64)
    state, _ = rollout(inst, [1, 3, 0])
    states = [initial_state(inst), state]
    batch = state_values(critic, inst, states)
    assert batch.shape == (2,)
    assert batch.data[1] == pytest.approx(value(critic, inst, state), rel=1e-12)


def test_zero_output_layer_gives_zero_values() -> None:
    inst = make_instance(3)
    critic = CriticModel(3, rng=make_rng(2), dtype=np.float64)
    weights = critic.store.snapshot()
    weights["critic.2.weight"] = np.zeros_like(weights["critic.2.weight"])
    critic.store.load(weights)
    assert value(critic, inst, initial_state(inst)) == 0.0


def test_size_mismatch_is_rejected() -> None:
    critic = CriticModel(3, rng=make_rng(0))
    with pytest.raises(CompatibilityError, match="n=3"):
        value(critic, make_instance(4), initial_state(make_instance(4)))


def test_squared_value_loss_gradient_check() -> None:
    inst = make_instance(4, seed=3)
    critic = CriticModel(4, rng=make_rng(3), dtype=np.float64)
    state, _ = rollout(inst, [0, 2, 3])
    batch = constant(np.stack([encode_state(inst, initial_state(inst)), encode_state(inst, state)]))
    targets = constant(np.array([1.5, -0.5]))

    def fn() -> Tensor:
        diff = critic.forward(batch) - targets
        return total(diff * diff)

    assert gradient_check(fn, critic.store.as_mapping(), rng=make_rng(4), coords_per_param=8) < 1e-4
