"""Sequential view of the QAP.

An episode alternates location and facility choices: step 2p picks a
location, step 2p+1 picks the facility placed there. Placing a facility
incurs the transport cost to every facility placed before it; the sum of
these incremental costs over a complete episode equals the QAP objective of
the induced assignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from core.errors import IllegalActionError, TerminalStateError
from core.models import CostForm, Role
from core.qap import Assignment, QapInstance

BoolArray = NDArray[np.bool_]


def _readonly(mask: BoolArray) -> BoolArray:
    mask.setflags(write=False)
    return mask


@dataclass(frozen=True, eq=False)
class MdpState:
    instance: QapInstance
    sequence: tuple[int, ...]
    location_used: BoolArray
    facility_used: BoolArray

    @property
    def t(self) -> int:
        return len(self.sequence)

    @property
    def n(self) -> int:
        return self.instance.n

    @property
    def is_terminal(self) -> bool:
        return self.t == 2 * self.instance.n

    @property
    def role(self) -> Role:
        """Role of the next action (location at even t, facility at odd t)."""
        return "location" if self.t % 2 == 0 else "facility"

    def locations(self) -> tuple[int, ...]:
        return self.sequence[0::2]

    def facilities(self) -> tuple[int, ...]:
        return self.sequence[1::2]


@dataclass(frozen=True, eq=False)
class ActionMask:
    role: Role
    allowed: BoolArray


def initial_state(instance: QapInstance) -> MdpState:
    n = instance.n
    return MdpState(
        instance=instance,
        sequence=(),
        location_used=_readonly(np.zeros(n, dtype=np.bool_)),
        facility_used=_readonly(np.zeros(n, dtype=np.bool_)),
    )


def legal_actions(state: MdpState) -> ActionMask:
    if state.is_terminal:
        raise TerminalStateError("no legal actions in a terminal state")
    used = state.location_used if state.role == "location" else state.facility_used
    return ActionMask(role=state.role, allowed=_readonly(~used))


def placement_cost(
    instance: QapInstance,
    sequence: tuple[int, ...],
    facility: int,
    *,
    form: CostForm = "symmetric",
) -> float:
    """Incremental cost of placing ``facility`` at the last location of ``sequence``.

    ``sequence`` ends with a location (odd t once the facility is appended).
    The symmetric form sums 2 F[f_prev][f] D[l_prev][l] over prior pairs; the
    general form sums both directed terms and includes the pair with itself.
    """
    flows = instance.flows
    dist = instance.distances
    loc = sequence[-1]
    prior_locs = np.asarray(sequence[0:-1:2], dtype=np.int64)
    prior_facs = np.asarray(sequence[1::2], dtype=np.int64)
    if form == "symmetric":
        if prior_locs.size == 0:
            return 0.0
        return 2.0 * float(np.dot(flows[prior_facs, facility], dist[prior_locs, loc]))
    locs = np.append(prior_locs, loc)
    facs = np.append(prior_facs, facility)
    forward = float(np.dot(flows[facs, facility], dist[locs, loc]))
    backward = float(np.dot(flows[facility, facs], dist[loc, locs]))
    return forward + backward


def step(
    state: MdpState, action: int, *, form: CostForm = "symmetric"
) -> tuple[MdpState, float]:
    """Apply ``action`` and return the next state with its incremental cost."""
    mask = legal_actions(state)
    if not 0 <= action < state.n or not mask.allowed[action]:
        raise IllegalActionError(
            f"{mask.role} {action} is not allowed at t={state.t}"
        )
    sequence = (*state.sequence, int(action))
    if mask.role == "location":
        loc_used = state.location_used.copy()
        loc_used[action] = True
        nxt = MdpState(
            instance=state.instance,
            sequence=sequence,
            location_used=_readonly(loc_used),
            facility_used=state.facility_used,
        )
        return nxt, 0.0
    fac_used = state.facility_used.copy()
    fac_used[action] = True
    cost = placement_cost(state.instance, state.sequence, int(action), form=form)
    nxt = MdpState(
        instance=state.instance,
        sequence=sequence,
        location_used=state.location_used,
        facility_used=_readonly(fac_used),
    )
    return nxt, cost


def assignment_of(state: MdpState) -> Assignment:
    if not state.is_terminal:
        raise TerminalStateError(f"state at t={state.t} is not terminal")
    perm = [0] * state.n
    for loc, fac in zip(state.locations(), state.facilities()):
        perm[loc] = fac
    return Assignment.of(perm)


def rollout(
    instance: QapInstance, actions: tuple[int, ...] | list[int]
) -> tuple[MdpState, list[float]]:
    """Play a full action sequence from the initial state."""
    state = initial_state(instance)
    costs: list[float] = []
    for action in actions:
        state, cost = step(state, action)
        costs.append(cost)
    return state, costs
