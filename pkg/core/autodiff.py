"""Reverse-mode automatic differentiation over dense numpy tensors.

Operations executed while a ``Tape`` is active (``with Tape() as tape:``)
are recorded in creation order; ``tape.backward(loss)`` walks the record in
reverse, which is a valid reverse topological order, and accumulates
gradients additively. Gradients are returned in a ``Gradients`` map instead
of being written onto the tensors, so many tapes can share read-only
parameters across threads.

Outside a tape every operation still computes its value; nothing is recorded.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from contextvars import ContextVar, Token
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, DTypeLike, NDArray

from core.errors import ConsistencyError, DegenerateMaskError, ShapeError

Array = NDArray[np.float64]
BackwardFn = Callable[[Array], Sequence["Array | None"]]

_ACTIVE_TAPE: ContextVar[Tape | None] = ContextVar("qapforge_tape", default=None)


class Tensor:
    """A dense value that may take part in gradient recording."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(
        self, data: ArrayLike, *, requires_grad: bool = False, name: str = ""
    ) -> None:
        self.data: Array = np.asarray(data)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> Array:
        return self.data

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other: Tensor | float) -> Tensor:
        return add(self, _lift(other, self))

    def __radd__(self, other: float) -> Tensor:
        return add(_lift(other, self), self)

    def __sub__(self, other: Tensor | float) -> Tensor:
        return sub(self, _lift(other, self))

    def __rsub__(self, other: float) -> Tensor:
        return sub(_lift(other, self), self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        return mul(self, _lift(other, self))

    def __rmul__(self, other: float) -> Tensor:
        return mul(_lift(other, self), self)

    def __neg__(self) -> Tensor:
        return neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)


@dataclass(frozen=True)
class _Node:
    out: Tensor
    parents: tuple[Tensor, ...]
    backward: BackwardFn


class Gradients:
    """Gradients keyed by tensor identity, as produced by ``Tape.backward``."""

    def __init__(self, values: dict[int, Array], keep: list[Tensor]) -> None:
        self._values = values
        # keeps keyed tensors alive so ids stay unique
        self._keep = keep

    def of(self, tensor: Tensor) -> Array | None:
        return self._values.get(id(tensor))

    def of_or_zeros(self, tensor: Tensor) -> Array:
        grad = self._values.get(id(tensor))
        return np.zeros_like(tensor.data) if grad is None else grad

    def for_params(self, params: Mapping[str, Tensor]) -> dict[str, Array]:
        """One gradient per named parameter; untouched parameters get zeros."""
        return {name: self.of_or_zeros(p) for name, p in params.items()}


class Tape:
    """Records differentiable operations executed inside its context."""

    def __init__(self) -> None:
        self.nodes: list[_Node] = []
        self._token: Token[Tape | None] | None = None

    def __enter__(self) -> Tape:
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def record(self, out: Tensor, parents: tuple[Tensor, ...], backward: BackwardFn) -> None:
        self.nodes.append(_Node(out=out, parents=parents, backward=backward))

    def backward(self, loss: Tensor) -> Gradients:
        if loss.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            raise ConsistencyError("loss does not depend on any trainable tensor")
        if not any(node.out is loss for node in reversed(self.nodes)):
            raise ConsistencyError("loss was not recorded on this tape")
        grads: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
        keep: list[Tensor] = [loss]
        for node in reversed(self.nodes):
            g = grads.get(id(node.out))
            if g is None:
                continue
            parent_grads = node.backward(g)
            for parent, pg in zip(node.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
                    keep.append(parent)
        return Gradients(grads, keep)


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def _make(data: Array, parents: tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires)
    tape = _ACTIVE_TAPE.get()
    if requires and tape is not None:
        tape.record(out, parents, backward)
    return out


def _lift(value: Tensor | float, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from exc


def constant(value: ArrayLike, dtype: DTypeLike = None) -> Tensor:
    return Tensor(np.asarray(value, dtype=dtype))


def detach(x: Tensor) -> Tensor:
    return Tensor(x.data, requires_grad=False)


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "mul")
    sa, sb = a.shape, b.shape
    return _make(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, sa), _unbroadcast(g * a.data, sb)),
    )


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g: Array) -> tuple[Array, Array]:
        left, right = a.data, b.data
        if left.ndim == 2 and right.ndim == 2:
            return g @ right.T, left.T @ g
        if left.ndim == 2:
            return np.outer(g, right), left.T @ g
        if right.ndim == 2:
            return right @ g, np.outer(left, g)
        return g * right, g * left

    return _make(a.data @ b.data, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose needs a matrix, got shape {a.shape}")
    return _make(a.data.T, (a,), lambda g: (g.T,))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    original = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {original} to {shape}") from exc
    return _make(data, (a,), lambda g: (g.reshape(original),))


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    """Stack ``a`` on top of ``b`` along the first axis."""
    if a.ndim != b.ndim or a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"concat_rows: incompatible shapes {a.shape} and {b.shape}")
    split = a.shape[0]
    return _make(
        np.concatenate([a.data, b.data], axis=0),
        (a, b),
        lambda g: (g[:split], g[split:]),
    )


def repeat_cols(v: Tensor, count: int) -> Tensor:
    """Turn a length-d vector into a d x count matrix of identical columns."""
    if v.ndim != 1:
        raise ShapeError(f"repeat_cols needs a vector, got shape {v.shape}")
    return _make(
        np.repeat(v.data[:, None], count, axis=1),
        (v,),
        lambda g: (g.sum(axis=1),),
    )


def column(m: Tensor, index: int) -> Tensor:
    if m.ndim != 2:
        raise ShapeError(f"column needs a matrix, got shape {m.shape}")

    def backward(g: Array) -> tuple[Array]:
        out = np.zeros_like(m.data)
        out[:, index] = g
        return (out,)

    return _make(m.data[:, index].copy(), (m,), backward)


def pick(v: Tensor, index: int) -> Tensor:
    """Scalar entry ``v[index]`` of a vector."""
    if v.ndim != 1:
        raise ShapeError(f"pick needs a vector, got shape {v.shape}")

    def backward(g: Array) -> tuple[Array]:
        out = np.zeros_like(v.data)
        out[index] = g
        return (out,)

    return _make(np.asarray(v.data[index]), (v,), backward)


def stack(scalars: Sequence[Tensor]) -> Tensor:
    """Vector from a sequence of scalar tensors."""
    if not scalars:
        raise ShapeError("stack needs at least one scalar")
    if any(s.data.size != 1 for s in scalars):
        raise ShapeError("stack accepts scalar tensors only")
    count = len(scalars)
    return _make(
        np.stack([s.data.reshape(()) for s in scalars]),
        tuple(scalars),
        lambda g: tuple(g[i] for i in range(count)),
    )


def total(a: Tensor) -> Tensor:
    """Sum of all entries as a scalar tensor."""
    shape = a.shape
    return _make(
        np.asarray(a.data.sum()),
        (a,),
        lambda g: (np.broadcast_to(g, shape).copy(),),
    )


def relu(a: Tensor) -> Tensor:
    positive = a.data > 0
    return _make(np.where(positive, a.data, 0).astype(a.data.dtype), (a,), lambda g: (g * positive,))


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: (g * y,))


def _check_mask(logits: Tensor, mask: ArrayLike) -> NDArray[np.bool_]:
    m = np.asarray(mask, dtype=np.bool_)
    if logits.ndim != 1 or m.shape != logits.shape:
        raise ShapeError(f"mask shape {m.shape} does not match logits {logits.shape}")
    if not m.any():
        raise DegenerateMaskError("every entry is masked")
    return m


def masked_softmax(logits: Tensor, mask: ArrayLike) -> Tensor:
    """Softmax over allowed entries; masked entries get exactly zero."""
    m = _check_mask(logits, mask)
    x = logits.data
    shifted = np.where(m, x - x[m].max(), -np.inf)
    e = np.exp(shifted)
    p = (e / e.sum()).astype(x.dtype)

    def backward(g: Array) -> tuple[Array]:
        return (p * (g - np.sum(g * p)),)

    return _make(p, (logits,), backward)


def masked_log_softmax(logits: Tensor, mask: ArrayLike) -> Tensor:
    """Log-softmax over allowed entries; masked entries hold 0 and get no gradient."""
    m = _check_mask(logits, mask)
    x = logits.data
    shifted = np.where(m, x - x[m].max(), -np.inf)
    lse = np.log(np.sum(np.exp(shifted)))
    y = np.where(m, shifted - lse, 0.0).astype(x.dtype)
    p = np.where(m, np.exp(y), 0.0)

    def backward(g: Array) -> tuple[Array]:
        gm = np.where(m, g, 0.0)
        return ((gm - p * gm.sum()).astype(x.dtype),)

    return _make(y, (logits,), backward)


def dropout(
    a: Tensor, rate: float, rng: np.random.Generator | None, *, training: bool
) -> Tensor:
    """Inverted dropout; the identity outside training mode."""
    if not training or rate <= 0.0 or rng is None:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.data.dtype) / (1.0 - rate)
    return mul(a, Tensor(keep.astype(a.data.dtype)))


def gradient_check(
    fn: Callable[[], Tensor],
    params: Mapping[str, Tensor] | Iterable[Tensor],
    *,
    epsilon: float = 1e-6,
    rng: np.random.Generator | None = None,
    coords_per_param: int = 16,
    atol: float = 1e-4,
) -> float:
    """Largest relative error between tape gradients and central differences.

    ``fn`` must be deterministic and scalar-valued. When ``rng`` is given, a
    random subset of at most ``coords_per_param`` coordinates is checked per
    parameter; otherwise the first ``coords_per_param`` coordinates are used.
    Errors are scaled by at least ``atol`` so that gradients which are zero
    up to round-off compare on an absolute footing.
    """
    tensors = list(params.values()) if isinstance(params, Mapping) else list(params)
    with Tape() as tape:
        loss = fn()
    grads = tape.backward(loss)
    worst = 0.0
    for p in tensors:
        analytic = grads.of_or_zeros(p)
        size = p.data.size
        count = min(coords_per_param, size)
        if rng is not None:
            coords = rng.choice(size, size=count, replace=False)
        else:
            coords = np.arange(count)
        flat = p.data.reshape(-1)
        for idx in coords:
            original = float(flat[idx])
            flat[idx] = original + epsilon
            f_plus = float(fn().data)
            flat[idx] = original - epsilon
            f_minus = float(fn().data)
            flat[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            exact = float(analytic.reshape(-1)[idx])
            scale = max(abs(exact), abs(numeric), atol)
            err = abs(exact - numeric) / scale
            if math.isnan(err):
                return math.inf
            worst = max(worst, err)
    return worst
