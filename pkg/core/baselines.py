"""Classical reference solvers: pairwise-swap local search and random permutations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Final

import numpy as np

from core.errors import InvalidInputError
from core.models import SwapStrategy
from core.qap import Assignment, IntArray, QapInstance, objective

MAX_SWAP_ITERATIONS: Final[int] = 1000
# relative slack below which a swap counts as a tie
_TIE_TOLERANCE: Final[float] = 1e-12


@dataclass(frozen=True)
class SwapResult:
    assignment: Assignment
    cost: float
    iterations_used: int
    converged: bool
    history: tuple[float, ...] = ()


def swap_delta(instance: QapInstance, perm: IntArray, p: int, q: int) -> float:
    """Cost change from exchanging the facilities at locations ``p`` and ``q``.

    O(n): only the rows of the two facilities move.
    """
    flows = instance.flows
    dist = instance.distances
    a = int(perm[p])
    b = int(perm[q])
    cross = float(np.dot(flows[b, perm] - flows[a, perm], dist[p] - dist[q]))
    return 2.0 * cross + 4.0 * float(flows[a, b] * dist[p, q])


def _improves(delta: float, cost: float) -> bool:
    return delta < -_TIE_TOLERANCE * max(1.0, abs(cost))


def swap_solve(
    instance: QapInstance,
    *,
    strategy: SwapStrategy = "first",
    max_iterations: int = MAX_SWAP_ITERATIONS,
) -> SwapResult:
    """Swap pairs of facilities, starting from the identity, until no swap improves.

    ``first`` accepts an improving pair as soon as the lexicographic scan over
    facility pairs finds it and keeps scanning from the updated assignment;
    ``best`` applies only the best pair of each full scan.
    """
    n = instance.n
    perm = np.arange(n, dtype=np.int64)
    loc = np.arange(n, dtype=np.int64)
    cost = objective(instance, Assignment.of(perm))
    history = [cost]
    iterations = 0
    converged = False

    def apply(a: int, b: int, delta: float) -> None:
        nonlocal cost
        p, q = int(loc[a]), int(loc[b])
        perm[p], perm[q] = b, a
        loc[a], loc[b] = q, p
        cost += delta
        history.append(cost)

    while iterations < max_iterations:
        iterations += 1
        improved = False
        if strategy == "first":
            for a in range(n - 1):
                for b in range(a + 1, n):
                    delta = swap_delta(instance, perm, int(loc[a]), int(loc[b]))
                    if _improves(delta, cost):
                        apply(a, b, delta)
                        improved = True
        else:
            best_delta = 0.0
            best_pair: tuple[int, int] | None = None
            for a in range(n - 1):
                for b in range(a + 1, n):
                    delta = swap_delta(instance, perm, int(loc[a]), int(loc[b]))
                    if delta < best_delta and _improves(delta, cost):
                        best_delta = delta
                        best_pair = (a, b)
            if best_pair is not None:
                apply(best_pair[0], best_pair[1], best_delta)
                improved = True
        if not improved:
            converged = True
            break

    assignment = Assignment.of(perm)
    return SwapResult(
        assignment=assignment,
        cost=objective(instance, assignment),
        iterations_used=iterations,
        converged=converged,
        history=tuple(history),
    )


def percentage_gap(c_sol: float, c_swap: float) -> float:
    """Relative gap ``(c_sol - c_swap) / c_swap``; negative when beating the baseline."""
    if not c_swap > 0.0:
        raise InvalidInputError(f"baseline cost must be positive, got {c_swap}")
    return (c_sol - c_swap) / c_swap


@dataclass(frozen=True)
class RandomBaseline:
    mean: float
    stderr: float
    samples: int


def random_baseline(
    instance: QapInstance, rng: np.random.Generator, samples: int
) -> RandomBaseline:
    """Monte Carlo cost of uniformly random assignments."""
    if samples < 1:
        raise InvalidInputError(f"samples must be at least 1, got {samples}")
    costs = np.array(
        [objective(instance, Assignment.of(rng.permutation(instance.n))) for _ in range(samples)]
    )
    stderr = float(np.std(costs, ddof=1)) / math.sqrt(samples) if samples > 1 else 0.0
    return RandomBaseline(mean=float(np.mean(costs)), stderr=stderr, samples=samples)
