"""Double pointer network policy.

Locations are embedded by three width-1 convolutions over the coordinates,
facilities by three graph convolutions over the flow graph. Two decoder
chains alternate: the upper chain points at a location, the lower chain at
the facility to place there. Each pointer block advances a GRU on its
chain's hidden state and scores candidates with a three-step attention
(attention vector, context, output distribution) or, for the ablation
decoder, a single linear layer.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import DTypeLike, NDArray

from core.autodiff import (
    Array,
    Tensor,
    column,
    concat_rows,
    constant,
    dropout,
    masked_log_softmax,
    masked_softmax,
    matmul,
    neg,
    pick,
    relu,
    repeat_cols,
    tanh,
    total,
    transpose,
)
from core.config import PolicyConfig
from core.env import MdpState, assignment_of, initial_state, legal_actions, step
from core.errors import CompatibilityError, InvalidInputError
from core.models import DecodeMode, Role
from core.nn import GruParams, ParameterStore, gru_cell, init_gru, linear, pointwise_conv, xavier_init
from core.qap import Assignment, QapInstance

Chain = Literal["upper", "lower"]
BoolArray = NDArray[np.bool_]


@dataclass(frozen=True)
class AttentionParams:
    v_a: Tensor
    w_a: Tensor
    v_o: Tensor
    w_o: Tensor


@dataclass(frozen=True)
class LinearParams:
    weight: Tensor
    bias: Tensor


class PolicyModel:
    """Named parameters of the double pointer network for one instance size."""

    def __init__(
        self,
        config: PolicyConfig,
        n: int,
        *,
        rng: np.random.Generator,
        dtype: DTypeLike = np.float32,
    ) -> None:
        if n < 1:
            raise InvalidInputError(f"n must be positive, got {n}")
        self.config = config
        self.n = n
        self.dtype = np.dtype(dtype)
        self.store = ParameterStore()
        d_k, d_i = config.d_k, config.d_i
        store = self.store

        widths = [2] + [d_k] * config.conv_layers
        for layer in range(config.conv_layers):
            store.add(
                f"conv.{layer}.weight",
                xavier_init(rng, (widths[layer + 1], widths[layer]), self.dtype),
            )
            store.add(f"conv.{layer}.bias", np.zeros(widths[layer + 1], dtype=self.dtype))

        # layer 0 consumes flow rows, so its input width is n
        for layer in range(config.gcn_layers):
            fan_in = n if layer == 0 else d_k
            store.add(f"gcn.{layer}.weight", xavier_init(rng, (fan_in, d_k), self.dtype))

        if config.gru_sharing == "shared":
            shared = init_gru(store, "gru", d_k, d_k, rng, self.dtype)
            self._gru: dict[Chain, GruParams] = {"upper": shared, "lower": shared}
        else:
            self._gru = {
                "upper": init_gru(store, "gru_upper", d_k, d_k, rng, self.dtype),
                "lower": init_gru(store, "gru_lower", d_k, d_k, rng, self.dtype),
            }

        self._attention: dict[Chain, AttentionParams] = {}
        self._mlp: dict[Chain, LinearParams] = {}
        chains: tuple[Chain, Chain] = ("upper", "lower")
        for chain in chains:
            if config.decoder == "attention":
                prefix = f"attn_{chain}"
                self._attention[chain] = AttentionParams(
                    v_a=store.add(f"{prefix}.v_a", xavier_init(rng, (d_i,), self.dtype)),
                    w_a=store.add(f"{prefix}.w_a", xavier_init(rng, (d_i, 2 * d_k), self.dtype)),
                    v_o=store.add(f"{prefix}.v_o", xavier_init(rng, (d_i,), self.dtype)),
                    w_o=store.add(f"{prefix}.w_o", xavier_init(rng, (d_i, 2 * d_k), self.dtype)),
                )
            else:
                prefix = f"mlp_{chain}"
                self._mlp[chain] = LinearParams(
                    weight=store.add(f"{prefix}.weight", xavier_init(rng, (n, d_k), self.dtype)),
                    bias=store.add(f"{prefix}.bias", np.zeros(n, dtype=self.dtype)),
                )

        self.start_token = store.add("start_token", xavier_init(rng, (d_k,), self.dtype))

    def gru(self, chain: Chain) -> GruParams:
        return self._gru[chain]

    def attention(self, chain: Chain) -> AttentionParams:
        return self._attention[chain]

    def mlp(self, chain: Chain) -> LinearParams:
        return self._mlp[chain]

    def check_instance(self, instance: QapInstance) -> None:
        if instance.n != self.n:
            raise CompatibilityError(
                f"model was built for n={self.n}, instance has n={instance.n}"
            )


def _activation(name: str) -> Callable[[Tensor], Tensor]:
    if name == "tanh":
        return tanh
    return lambda x: x


def embed_locations(model: PolicyModel, coords: Array) -> Tensor:
    """d_k x n location embeddings; column j depends only on coordinate row j."""
    pts = np.asarray(coords)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInputError(f"coords must be an n x 2 matrix, got {pts.shape}")
    x = constant(pts.T, model.dtype)
    layers = model.config.conv_layers
    for layer in range(layers):
        x = pointwise_conv(
            x,
            model.store[f"conv.{layer}.weight"],
            model.store[f"conv.{layer}.bias"],
        )
        if layer < layers - 1:
            x = relu(x)
    return x


def normalized_adjacency(flows: Array) -> Array:
    """S^-1/2 (F + I) S^-1/2 with S the diagonal of row sums of F + I."""
    n = flows.shape[0]
    a = flows + np.eye(n)
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def embed_facilities(model: PolicyModel, flows: Array) -> Tensor:
    """d_k x n facility embeddings from graph convolutions over the flow graph."""
    flw = np.asarray(flows, dtype=np.float64)
    if flw.ndim != 2 or flw.shape[0] != flw.shape[1]:
        raise InvalidInputError(f"flows must be square, got {flw.shape}")
    if not np.array_equal(flw, flw.T):
        raise InvalidInputError("flows must be symmetric")
    if flw.shape[0] != model.n:
        raise CompatibilityError(f"model was built for n={model.n}, flows have n={flw.shape[0]}")
    adj = constant(normalized_adjacency(flw), model.dtype)
    h = constant(flw, model.dtype)
    layers = model.config.gcn_layers
    for layer in range(layers):
        h = matmul(matmul(adj, h), model.store[f"gcn.{layer}.weight"])
        if layer < layers - 1:
            h = relu(h)
    return transpose(h)


def attention_logits(
    embeddings: Tensor,
    query: Tensor,
    params: AttentionParams,
    *,
    activation: str = "identity",
) -> Tensor:
    """Unmasked output scores of the three-step attention."""
    f = _activation(activation)
    n = embeddings.shape[1]
    e_tilde = concat_rows(embeddings, repeat_cols(query, n))
    a = masked_softmax(params.v_a @ f(params.w_a @ e_tilde), np.ones(n, dtype=np.bool_))
    context = embeddings @ a
    e_hat = concat_rows(embeddings, repeat_cols(context, n))
    return params.v_o @ f(params.w_o @ e_hat)


def attention_probs(
    embeddings: Tensor,
    query: Tensor,
    params: AttentionParams,
    mask: BoolArray,
    *,
    activation: str = "identity",
) -> Tensor:
    logits = attention_logits(embeddings, query, params, activation=activation)
    return masked_softmax(logits, mask)


@dataclass(frozen=True, eq=False)
class Embeddings:
    locations: Tensor
    facilities: Tensor


def embed_instance(
    model: PolicyModel,
    instance: QapInstance,
    *,
    training: bool = False,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Embeddings:
    model.check_instance(instance)
    loc = embed_locations(model, instance.coords)
    fac = embed_facilities(model, instance.flows)
    return Embeddings(
        locations=dropout(loc, dropout_rate, rng, training=training),
        facilities=dropout(fac, dropout_rate, rng, training=training),
    )


@dataclass(frozen=True, eq=False)
class DecoderState:
    env: MdpState
    upper_hidden: Tensor
    lower_hidden: Tensor
    next_input: Tensor


@dataclass(frozen=True, eq=False)
class BlockOutput:
    role: Role
    mask: BoolArray
    log_probs: Tensor
    probs: Tensor
    hidden: Tensor


class PolicyDecoder:
    """Runs pointer blocks for one instance over precomputed embeddings."""

    def __init__(
        self,
        model: PolicyModel,
        instance: QapInstance,
        *,
        training: bool = False,
        dropout_rate: float = 0.0,
        rng: np.random.Generator | None = None,
    ) -> None:
        self.model = model
        self.instance = instance
        self.training = training
        self.dropout_rate = dropout_rate
        self.rng = rng
        self.embeddings = embed_instance(
            model, instance, training=training, dropout_rate=dropout_rate, rng=rng
        )

    def start(self) -> DecoderState:
        zeros = constant(np.zeros(self.model.config.d_k), self.model.dtype)
        return DecoderState(
            env=initial_state(self.instance),
            upper_hidden=zeros,
            lower_hidden=zeros,
            next_input=self.model.start_token,
        )

    def block(self, state: DecoderState) -> BlockOutput:
        mask = legal_actions(state.env)
        chain: Chain = "upper" if mask.role == "location" else "lower"
        previous = state.upper_hidden if chain == "upper" else state.lower_hidden
        hidden = gru_cell(state.next_input, previous, self.model.gru(chain))
        query = dropout(hidden, self.dropout_rate, self.rng, training=self.training)
        if self.model.config.decoder == "attention":
            candidates = (
                self.embeddings.locations if chain == "upper" else self.embeddings.facilities
            )
            logits = attention_logits(
                candidates,
                query,
                self.model.attention(chain),
                activation=self.model.config.attention_activation,
            )
        else:
            params = self.model.mlp(chain)
            logits = linear(query, params.weight, params.bias)
        return BlockOutput(
            role=mask.role,
            mask=mask.allowed,
            log_probs=masked_log_softmax(logits, mask.allowed),
            probs=masked_softmax(logits, mask.allowed),
            hidden=hidden,
        )

    def select(self, state: DecoderState, out: BlockOutput, action: int) -> tuple[DecoderState, float]:
        env, cost = step(state.env, action)
        if out.role == "location":
            return (
                DecoderState(
                    env=env,
                    upper_hidden=out.hidden,
                    lower_hidden=state.lower_hidden,
                    next_input=column(self.embeddings.locations, action),
                ),
                cost,
            )
        return (
            DecoderState(
                env=env,
                upper_hidden=state.upper_hidden,
                lower_hidden=out.hidden,
                next_input=column(self.embeddings.facilities, action),
            ),
            cost,
        )


def greedy_action(log_probs: Array, mask: BoolArray) -> int:
    """Highest-probability allowed index; ties go to the lowest index."""
    scores = np.where(mask, log_probs, -np.inf)
    return int(np.argmax(scores))


def sample_action(probs: Array, mask: BoolArray, rng: np.random.Generator) -> int:
    weights = np.where(mask, np.asarray(probs, dtype=np.float64), 0.0)
    cdf = np.cumsum(weights)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    if idx >= weights.size or not mask[idx]:
        # rounding at the top of the cdf: fall back to the last allowed index
        idx = int(np.flatnonzero(mask)[-1])
    return idx


@dataclass(frozen=True, eq=False)
class TraceStep:
    t: int
    role: Role
    action: int
    probs: Array
    log_prob: float
    entropy: float


@dataclass(frozen=True, eq=False)
class EpisodeTrace:
    steps: tuple[TraceStep, ...]
    states: tuple[MdpState, ...]
    costs: tuple[float, ...]
    assignment: Assignment
    log_prob_terms: tuple[Tensor, ...]
    entropy_terms: tuple[Tensor, ...]

    @property
    def actions(self) -> tuple[int, ...]:
        return tuple(s.action for s in self.steps)

    @property
    def total_cost(self) -> float:
        return float(sum(self.costs))

    @property
    def total_log_prob(self) -> float:
        return float(sum(s.log_prob for s in self.steps))


def decode_episode(
    model: PolicyModel,
    instance: QapInstance,
    mode: DecodeMode,
    rng: np.random.Generator | None = None,
    *,
    training: bool = False,
    dropout_rate: float = 0.0,
) -> EpisodeTrace:
    """Roll out one full episode of 2n pointer blocks."""
    if mode == "sample" and rng is None:
        raise InvalidInputError("sample mode needs a random generator")
    decoder = PolicyDecoder(
        model, instance, training=training, dropout_rate=dropout_rate, rng=rng
    )
    state = decoder.start()
    steps: list[TraceStep] = []
    states: list[MdpState] = []
    costs: list[float] = []
    log_prob_terms: list[Tensor] = []
    entropy_terms: list[Tensor] = []
    for t in range(2 * instance.n):
        out = decoder.block(state)
        if mode == "greedy" or rng is None:
            action = greedy_action(out.log_probs.data, out.mask)
        else:
            action = sample_action(out.probs.data, out.mask, rng)
        chosen = pick(out.log_probs, action)
        entropy = neg(total(out.probs * out.log_probs))
        steps.append(
            TraceStep(
                t=t,
                role=out.role,
                action=action,
                probs=out.probs.data.copy(),
                log_prob=chosen.item(),
                entropy=entropy.item(),
            )
        )
        states.append(state.env)
        log_prob_terms.append(chosen)
        entropy_terms.append(entropy)
        state, cost = decoder.select(state, out, action)
        costs.append(cost)
    return EpisodeTrace(
        steps=tuple(steps),
        states=tuple(states),
        costs=tuple(costs),
        assignment=assignment_of(state.env),
        log_prob_terms=tuple(log_prob_terms),
        entropy_terms=tuple(entropy_terms),
    )


def score_actions(model: PolicyModel, instance: QapInstance, actions: Sequence[int]) -> float:
    """Total log-probability of a complete action sequence under the policy."""
    if len(actions) != 2 * instance.n:
        raise InvalidInputError(
            f"expected {2 * instance.n} actions for n={instance.n}, got {len(actions)}"
        )
    decoder = PolicyDecoder(model, instance)
    state = decoder.start()
    log_prob = 0.0
    for action in actions:
        out = decoder.block(state)
        # stepping first surfaces illegal actions before reading a masked entry
        nxt, _ = decoder.select(state, out, int(action))
        log_prob += float(out.log_probs.data[int(action)])
        state = nxt
    return log_prob
