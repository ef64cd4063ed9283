"""Greedy and beam-search decoding of a trained policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from core.env import assignment_of
from core.errors import ConsistencyError, InvalidInputError
from core.policy import BlockOutput, DecoderState, PolicyDecoder, PolicyModel, decode_episode
from core.qap import Assignment, QapInstance, objective


def _checked_cost(instance: QapInstance, assignment: Assignment, episode_cost: float) -> float:
    cost = objective(instance, assignment)
    if abs(cost - episode_cost) > 1e-9 * max(1.0, abs(cost)):
        raise ConsistencyError(
            f"episode cost {episode_cost!r} disagrees with objective {cost!r}"
        )
    return cost


def solve_greedy(policy: PolicyModel, instance: QapInstance) -> tuple[Assignment, float]:
    policy.check_instance(instance)
    trace = decode_episode(policy, instance, "greedy")
    return trace.assignment, _checked_cost(instance, trace.assignment, trace.total_cost)


@dataclass(frozen=True, eq=False)
class BeamEntry:
    state: DecoderState
    actions: tuple[int, ...]
    log_prob: float
    cost: float


def beam_search(policy: PolicyModel, instance: QapInstance, width: int) -> list[BeamEntry]:
    """Complete paths surviving a width-limited search, best log-probability first.

    Survivors are ranked by cumulative log-probability; equal scores fall back
    to the lexicographic order of the action sequences.
    """
    if width < 1:
        raise InvalidInputError(f"beam width must be at least 1, got {width}")
    policy.check_instance(instance)
    decoder = PolicyDecoder(policy, instance)
    beam = [BeamEntry(state=decoder.start(), actions=(), log_prob=0.0, cost=0.0)]
    for _ in range(2 * instance.n):
        candidates: list[tuple[BeamEntry, BlockOutput, int, float]] = []
        for entry in beam:
            out = decoder.block(entry.state)
            log_probs = out.log_probs.data
            for action in np.flatnonzero(out.mask):
                a = int(action)
                candidates.append((entry, out, a, entry.log_prob + float(log_probs[a])))
        candidates.sort(key=lambda c: (-c[3], (*c[0].actions, c[2])))
        beam = []
        for entry, out, action, log_prob in candidates[:width]:
            nxt, cost = decoder.select(entry.state, out, action)
            beam.append(
                BeamEntry(
                    state=nxt,
                    actions=(*entry.actions, action),
                    log_prob=log_prob,
                    cost=entry.cost + cost,
                )
            )
    return beam


def solve_beam(policy: PolicyModel, instance: QapInstance, width: int) -> tuple[Assignment, float]:
    """Lowest-cost completed path among the beam survivors."""
    beam = beam_search(policy, instance, width)
    best = min(beam, key=lambda e: (e.cost, -e.log_prob, e.actions))
    assignment = assignment_of(best.state.env)
    return assignment, _checked_cost(instance, assignment, best.cost)
