"""Neural building blocks: parameter storage, initialization, layers, Adam."""

from __future__ import annotations

import math
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import DTypeLike

from core.autodiff import Array, Tensor, add, matmul, reshape, sigmoid, tanh
from core.errors import ConsistencyError, ShapeError


class ParameterStore:
    """Named trainable tensors in insertion order."""

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: Array) -> Tensor:
        if name in self._params:
            raise ConsistencyError(f"duplicate parameter name {name!r}")
        tensor = Tensor(np.array(data, copy=True), requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> list[tuple[str, Tensor]]:
        return list(self._params.items())

    def as_mapping(self) -> Mapping[str, Tensor]:
        return self._params

    def snapshot(self) -> dict[str, Array]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load(self, values: Mapping[str, Array]) -> None:
        """Replace parameter values by name; names and shapes must match exactly."""
        if list(values) != list(self._params):
            missing = sorted(set(self._params) - set(values))
            extra = sorted(set(values) - set(self._params))
            raise ConsistencyError(f"parameter names differ: missing={missing} extra={extra}")
        for name, p in self._params.items():
            arr = np.asarray(values[name])
            if arr.shape != p.data.shape:
                raise ShapeError(f"{name}: expected shape {p.data.shape}, got {arr.shape}")
            p.data = np.array(arr, dtype=p.data.dtype, copy=True)


def xavier_init(
    rng: np.random.Generator, shape: tuple[int, ...], dtype: DTypeLike = np.float64
) -> Array:
    """Uniform on [-a, a] with a = sqrt(6 / (fan_in + fan_out)).

    For a matrix of shape (out, in), fan_out = out and fan_in = in; a vector
    uses its length for both.
    """
    if len(shape) == 2:
        fan_out, fan_in = shape
    elif len(shape) == 1:
        fan_out = fan_in = shape[0]
    else:
        raise ShapeError(f"xavier_init supports 1-d or 2-d shapes, got {shape}")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``weight @ x (+ bias)`` for a vector ``x``."""
    if x.ndim != 1 or weight.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise ShapeError(f"linear: weight {weight.shape} incompatible with input {x.shape}")
    out = matmul(weight, x)
    return out if bias is None else add(out, bias)


def pointwise_conv(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Width-1 convolution: the same affine map applied to every column."""
    if x.ndim != 2 or weight.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise ShapeError(f"pointwise_conv: weight {weight.shape} incompatible with input {x.shape}")
    c_out = weight.shape[0]
    if bias.data.size != c_out:
        raise ShapeError(f"pointwise_conv: bias has {bias.data.size} entries, expected {c_out}")
    return add(matmul(weight, x), reshape(bias, (c_out, 1)))


@dataclass(frozen=True)
class GruParams:
    w_z: Tensor
    w_r: Tensor
    w_h: Tensor
    u_z: Tensor
    u_r: Tensor
    u_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    @property
    def d_in(self) -> int:
        return self.w_z.shape[1]

    @property
    def d_k(self) -> int:
        return self.u_z.shape[0]

    @staticmethod
    def from_store(store: ParameterStore, prefix: str) -> GruParams:
        return GruParams(
            **{key: store[f"{prefix}.{key}"] for key in _GRU_KEYS},
        )


_GRU_KEYS = ("w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h")


def init_gru(
    store: ParameterStore,
    prefix: str,
    d_in: int,
    d_k: int,
    rng: np.random.Generator,
    dtype: DTypeLike = np.float64,
) -> GruParams:
    for gate in ("z", "r", "h"):
        store.add(f"{prefix}.w_{gate}", xavier_init(rng, (d_k, d_in), dtype))
    for gate in ("z", "r", "h"):
        store.add(f"{prefix}.u_{gate}", xavier_init(rng, (d_k, d_k), dtype))
    for gate in ("z", "r", "h"):
        store.add(f"{prefix}.b_{gate}", np.zeros(d_k, dtype=dtype))
    return GruParams.from_store(store, prefix)


def gru_cell(x: Tensor, h: Tensor, params: GruParams) -> Tensor:
    """One GRU step: sigmoid gates z and r, tanh candidate, convex blend."""
    if x.shape != (params.d_in,) or h.shape != (params.d_k,):
        raise ShapeError(
            f"gru_cell: expected x ({params.d_in},) and h ({params.d_k},), "
            f"got {x.shape} and {h.shape}"
        )
    z = sigmoid(params.w_z @ x + params.u_z @ h + params.b_z)
    r = sigmoid(params.w_r @ x + params.u_r @ h + params.b_r)
    candidate = tanh(params.w_h @ x + params.u_h @ (r * h) + params.b_h)
    return (1.0 - z) * h + z * candidate


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)


def adam_step(
    store: ParameterStore,
    grads: Mapping[str, Array],
    state: AdamState,
    config: AdamConfig,
) -> AdamState:
    """Apply one bias-corrected Adam update in place and return the state."""
    missing = [name for name in store if name not in grads]
    if missing:
        raise ConsistencyError(f"missing gradients for parameters: {missing}")
    state.step += 1
    t = state.step
    correction1 = 1.0 - config.beta1**t
    correction2 = 1.0 - config.beta2**t
    for name, p in store.items():
        g = np.asarray(grads[name], dtype=p.data.dtype)
        if g.shape != p.data.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {p.data.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None or v is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * (g * g)
        state.m[name] = m.astype(p.data.dtype)
        state.v[name] = v.astype(p.data.dtype)
        m_hat = m / correction1
        v_hat = v / correction2
        update = config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
        p.data = (p.data - update).astype(p.data.dtype)
    return state
