from __future__ import annotations

from typing import Literal, TypeGuard

Role = Literal["location", "facility"]
DecodeMode = Literal["sample", "greedy"]
CostForm = Literal["symmetric", "general"]
SwapStrategy = Literal["first", "best"]
SolveMethod = Literal["swap", "swap-best", "exact", "rl-greedy", "rl-beam"]

SOLVE_METHODS: tuple[SolveMethod, ...] = (
    "swap",
    "swap-best",
    "exact",
    "rl-greedy",
    "rl-beam",
)


def is_solve_method(value: str) -> TypeGuard[SolveMethod]:
    return value in SOLVE_METHODS


def is_decode_mode(value: str) -> TypeGuard[DecodeMode]:
    return value in ("sample", "greedy")
