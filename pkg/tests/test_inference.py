from __future__ import annotations

import pytest

from core.errors import CompatibilityError, InvalidInputError
from core.inference import beam_search, solve_beam, solve_greedy
from core.policy import score_actions
from core.qap import exact_solve, objective
from tests.helpers import make_instance, make_policy


def test_greedy_cost_matches_objective_and_is_deterministic() -> None:
    policy = make_policy(6)
    inst = make_instance(6, seed=1)
    assignment, cost = solve_greedy(policy, inst)
    assert cost == objective(inst, assignment)
    assert solve_greedy(policy, inst) == (assignment, cost)


def test_width_one_beam_equals_greedy() -> None:
    policy = make_policy(5, seed=3)
    for seed in range(100):
        inst = make_instance(5, seed=seed)
        assert solve_beam(policy, inst, 1) == solve_greedy(policy, inst)


def test_exhaustive_beam_finds_the_optimum() -> None:
    policy = make_policy(3, seed=2)
    inst = make_instance(3, seed=4)
    # (3!)^2 complete action sequences exist at n=3
    _, cost = solve_beam(policy, inst, 36)
    _, best = exact_solve(inst)
    assert cost == pytest.approx(best, rel=1e-12)


def test_two_facility_beam_is_trivially_optimal() -> None:
    policy = make_policy(2)
    inst = make_instance(2, seed=5)
    _, cost = solve_beam(policy, inst, 3)
    assert cost == pytest.approx(exact_solve(inst)[1], rel=1e-12)


def test_beam_survivors_are_ranked_by_log_probability() -> None:
    policy = make_policy(4, seed=6)
    inst = make_instance(4, seed=6)
    beam = beam_search(policy, inst, 5)
    assert len(beam) == 5
    scores = [entry.log_prob for entry in beam]
    assert scores == sorted(scores, reverse=True)
    for entry in beam:
        assert len(entry.actions) == 8
        assert entry.log_prob == pytest.approx(score_actions(policy, inst, entry.actions), abs=1e-6)


def test_beam_width_must_be_positive() -> None:
    with pytest.raises(InvalidInputError, match="at least 1"):
        solve_beam(make_policy(3), make_instance(3), 0)


def test_size_mismatch_is_incompatible() -> None:
    with pytest.raises(CompatibilityError):
        solve_greedy(make_policy(3), make_instance(4))
