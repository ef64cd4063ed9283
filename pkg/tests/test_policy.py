from __future__ import annotations

import math

import numpy as np
import pytest

from core.autodiff import Tensor, constant, gradient_check, pick, total
from core.config import PolicyConfig
from core.errors import CompatibilityError, InvalidInputError
from core.policy import (
    PolicyDecoder,
    PolicyModel,
    attention_logits,
    attention_probs,
    decode_episode,
    embed_facilities,
    embed_locations,
    greedy_action,
    score_actions,
)
from core.qap import Assignment, objective
from core.rng import make_rng
from tests.helpers import make_instance, make_policy


def test_parameter_names_follow_configuration() -> None:
    shared = make_policy(4)
    names = list(shared.store)
    assert names[0] == "conv.0.weight"
    assert "gru.w_z" in names
    assert "attn_upper.v_a" in names
    assert "attn_lower.w_o" in names
    assert names[-1] == "start_token"
    assert shared.store["gcn.0.weight"].shape == (4, 8)

    split = make_policy(4, PolicyConfig(d_k=8, d_i=6, gru_sharing="per_chain", decoder="mlp"))
    names = list(split.store)
    assert "gru_upper.u_h" in names
    assert "gru_lower.u_h" in names
    assert "gru.u_h" not in names
    assert split.store["mlp_upper.weight"].shape == (4, 8)
    assert not any(name.startswith("attn_") for name in names)


def test_layer_counts_are_fixed_at_three() -> None:
    with pytest.raises(ValueError, match="gcn_layers"):
        PolicyConfig(gcn_layers=2)


def test_embedding_shapes() -> None:
    model = make_policy(5)
    inst = make_instance(5)
    assert embed_locations(model, inst.coords).shape == (8, 5)
    assert embed_facilities(model, inst.flows).shape == (8, 5)


def test_location_embedding_column_depends_on_its_row_only() -> None:
    model = make_policy(5)
    coords = np.array(make_instance(5).coords)
    base = embed_locations(model, coords).data
    coords[2] += 0.25
    moved = embed_locations(model, coords).data
    changed = np.any(moved != base, axis=0)
    assert changed.tolist() == [False, False, True, False, False]


def test_facility_embeddings_follow_relabeling() -> None:
    model = make_policy(6)
    inst = make_instance(6, seed=3)
    relabel = make_rng(4).permutation(6)
    base = embed_facilities(model, inst.flows).data

    weights = model.store.snapshot()
    # flow rows are the first-layer input, so its weight rows move with them
    weights["gcn.0.weight"] = weights["gcn.0.weight"][relabel]
    model.store.load(weights)
    moved = embed_facilities(model, inst.flows[np.ix_(relabel, relabel)]).data
    assert np.allclose(moved, base[:, relabel], atol=1e-12)


def test_asymmetric_flows_are_rejected() -> None:
    model = make_policy(3)
    flows = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(InvalidInputError, match="symmetric"):
        embed_facilities(model, flows)


def test_instance_size_must_match_model() -> None:
    model = make_policy(4)
    with pytest.raises(CompatibilityError, match="n=4"):
        decode_episode(model, make_instance(5), "greedy")


def test_greedy_trace_is_a_feasible_episode() -> None:
    model = make_policy(5)
    inst = make_instance(5, seed=2)
    trace = decode_episode(model, inst, "greedy")
    assert len(trace.steps) == 10
    assert [s.role for s in trace.steps] == ["location", "facility"] * 5
    assert sorted(trace.actions[0::2]) == list(range(5))
    assert sorted(trace.actions[1::2]) == list(range(5))
    assert trace.total_cost == pytest.approx(objective(inst, trace.assignment), rel=1e-9)
    for s in trace.steps:
        assert abs(s.probs.sum() - 1.0) < 1e-6
        assert s.entropy >= -1e-12


def test_masked_candidates_get_exact_zero_probability() -> None:
    model = make_policy(4)
    trace = decode_episode(model, make_instance(4), "sample", make_rng(3))
    used_locations: list[int] = []
    used_facilities: list[int] = []
    for s in trace.steps:
        used = used_locations if s.role == "location" else used_facilities
        assert all(s.probs[i] == 0.0 for i in used)
        used.append(s.action)


def test_greedy_decoding_is_deterministic() -> None:
    model = make_policy(6)
    inst = make_instance(6)
    assert decode_episode(model, inst, "greedy").actions == decode_episode(model, inst, "greedy").actions


def test_sampling_is_reproducible_per_seed() -> None:
    model = make_policy(6)
    inst = make_instance(6)
    a = decode_episode(model, inst, "sample", make_rng(9))
    b = decode_episode(model, inst, "sample", make_rng(9))
    assert a.actions == b.actions


def test_sampling_needs_a_generator() -> None:
    with pytest.raises(InvalidInputError, match="random generator"):
        decode_episode(make_policy(3), make_instance(3), "sample")


def test_sampled_episodes_are_always_permutations() -> None:
    model = make_policy(5)
    instances = [make_instance(5, seed=s) for s in range(7)]
    rng = make_rng(10)
    for i in range(10_000):
        trace = decode_episode(model, instances[i % 7], "sample", rng)
        assert sorted(trace.assignment.perm) == list(range(5))


def test_trace_log_probability_matches_rescoring() -> None:
    model = make_policy(5)
    inst = make_instance(5, seed=6)
    trace = decode_episode(model, inst, "greedy")
    assert score_actions(model, inst, trace.actions) == pytest.approx(trace.total_log_prob, abs=1e-6)


def test_greedy_ties_go_to_lowest_index() -> None:
    log_probs = np.log(np.array([0.2, 0.4, 0.4]))
    assert greedy_action(log_probs, np.array([True, True, True])) == 1
    assert greedy_action(log_probs, np.array([True, False, True])) == 2


@pytest.mark.parametrize(
    "config",
    [
        PolicyConfig(d_k=6, d_i=5),
        PolicyConfig(d_k=6, d_i=5, attention_activation="tanh", gru_sharing="per_chain"),
        PolicyConfig(d_k=6, d_i=5, decoder="mlp"),
    ],
)
def test_policy_log_probability_gradient_check(config: PolicyConfig) -> None:
    model = make_policy(4, config, seed=5)
    inst = make_instance(4, seed=5)
    actions = decode_episode(model, inst, "greedy").actions

    def fn() -> Tensor:
        decoder = PolicyDecoder(model, inst)
        state = decoder.start()
        terms: list[Tensor] = []
        for action in actions:
            out = decoder.block(state)
            terms.append(pick(out.log_probs, action))
            state, _ = decoder.select(state, out, action)
        result = terms[0]
        for term in terms[1:]:
            result = result + term
        return result

    assert gradient_check(fn, model.store.as_mapping(), rng=make_rng(6), coords_per_param=4) < 1e-4


def test_attention_block_gradient_check() -> None:
    model = make_policy(5, seed=8)
    rng = make_rng(8)
    embeddings = Tensor(rng.standard_normal((8, 5)), requires_grad=True)
    query = Tensor(rng.standard_normal(8), requires_grad=True)
    params = model.attention("upper")
    weights = constant(rng.standard_normal(5))

    def fn() -> Tensor:
        return total(attention_logits(embeddings, query, params) * weights)

    tensors = [embeddings, query, params.v_a, params.w_a, params.v_o, params.w_o]
    assert gradient_check(fn, tensors, rng=make_rng(9)) < 1e-5


def test_float32_model_decodes() -> None:
    model = PolicyModel(PolicyConfig(d_k=8, d_i=8), 4, rng=make_rng(0), dtype=np.float32)
    trace = decode_episode(model, make_instance(4), "greedy")
    assert model.store["start_token"].data.dtype == np.float32
    assert sorted(trace.assignment.perm) == [0, 1, 2, 3]


@pytest.mark.parametrize("activation", ["identity", "tanh"])
def test_attention_probs_respect_the_mask(activation: str) -> None:
    model = make_policy(5, seed=3)
    rng = make_rng(3)
    embeddings = constant(rng.standard_normal((8, 5)))
    query = constant(rng.standard_normal(8))
    mask = np.array([True, False, True, True, False])
    probs = attention_probs(
        embeddings, query, model.attention("lower"), mask, activation=activation
    ).data
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert probs[1] == 0.0
    assert probs[4] == 0.0
    assert np.all(probs[mask] > 0.0)


def _uniform_policy(n: int) -> PolicyModel:
    model = make_policy(n, seed=4)
    for chain in ("upper", "lower"):
        model.store[f"attn_{chain}.v_o"].data[...] = 0.0
    return model


def test_uniform_policy_entropy_is_log_candidate_count() -> None:
    n = 5
    trace = decode_episode(_uniform_policy(n), make_instance(n, seed=4), "sample", make_rng(4))
    expected = [math.log(n - t // 2) for t in range(2 * n)]
    assert [s.entropy for s in trace.steps] == pytest.approx(expected, abs=1e-12)

    random_init = decode_episode(make_policy(n, seed=4), make_instance(n, seed=4), "greedy")
    assert sum(s.entropy for s in random_init.steps) <= sum(expected) + 1e-12


def test_uniform_policy_cost_matches_random_permutations() -> None:
    n, episodes = 6, 1000
    inst = make_instance(n, seed=21)
    model = _uniform_policy(n)
    rng = make_rng(21, 1)
    policy_costs = np.array(
        [decode_episode(model, inst, "sample", rng).total_cost for _ in range(episodes)]
    )
    perm_rng = make_rng(21, 2)
    random_costs = np.array(
        [
            objective(inst, Assignment.of(perm_rng.permutation(n)))
            for _ in range(episodes)
        ]
    )
    stderr = math.sqrt(
        policy_costs.var(ddof=1) / episodes + random_costs.var(ddof=1) / episodes
    )
    assert abs(policy_costs.mean() - random_costs.mean()) <= 3.0 * stderr
