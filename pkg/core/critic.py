"""State-value MLP over the flattened instance and the selection prefix."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Final

import numpy as np
from numpy.typing import DTypeLike

from core.autodiff import Array, Tensor, add, constant, matmul, relu, reshape
from core.env import MdpState
from core.errors import CompatibilityError
from core.nn import ParameterStore, xavier_init
from core.qap import QapInstance

HIDDEN_WIDTHS: Final[tuple[int, int]] = (512, 1024)
SENTINEL: Final[float] = -1.0


def input_width(n: int) -> int:
    return 2 * n * n + 2 * n


def encode_state(instance: QapInstance, state: MdpState) -> Array:
    """Row-major F, row-major D, then 2n slots of index/n (-1 when not yet taken)."""
    n = instance.n
    slots = np.full(2 * n, SENTINEL, dtype=np.float64)
    if state.sequence:
        slots[: state.t] = np.asarray(state.sequence, dtype=np.float64) / n
    return np.concatenate([instance.flows.ravel(), instance.distances.ravel(), slots])


class CriticModel:
    """MLP ``2n^2+2n -> 512 -> 1024 -> 1`` with ReLU hidden layers.

    Weights are stored input-major (in x out) so a batch of encoded states,
    one per row, goes through with plain row-vector products.
    """

    def __init__(
        self, n: int, *, rng: np.random.Generator, dtype: DTypeLike = np.float32
    ) -> None:
        self.n = n
        self.dtype = np.dtype(dtype)
        self.store = ParameterStore()
        widths = [input_width(n), *HIDDEN_WIDTHS, 1]
        for layer in range(len(widths) - 1):
            self.store.add(
                f"critic.{layer}.weight",
                xavier_init(rng, (widths[layer], widths[layer + 1]), self.dtype),
            )
            self.store.add(f"critic.{layer}.bias", np.zeros(widths[layer + 1], dtype=self.dtype))
        self.layers = len(widths) - 1

    def forward(self, inputs: Tensor) -> Tensor:
        """Values for an m x width batch of encoded states, as an m-vector."""
        x = inputs
        for layer in range(self.layers):
            x = add(
                matmul(x, self.store[f"critic.{layer}.weight"]),
                self.store[f"critic.{layer}.bias"],
            )
            if layer < self.layers - 1:
                x = relu(x)
        return reshape(x, (inputs.shape[0],))


def state_values(model: CriticModel, instance: QapInstance, states: Sequence[MdpState]) -> Tensor:
    """Values of a sequence of non-terminal states in one batched pass."""
    if instance.n != model.n:
        raise CompatibilityError(f"critic was built for n={model.n}, instance has n={instance.n}")
    batch = np.stack([encode_state(instance, s) for s in states])
    return model.forward(constant(batch, model.dtype))


def value(model: CriticModel, instance: QapInstance, state: MdpState) -> float:
    return float(state_values(model, instance, [state]).data[0])
