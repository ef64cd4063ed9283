from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

from cli.models import SolveRecord
from cli.types import ClockProtocol, SolverProtocol
from core.baselines import swap_solve
from core.checkpoint import load_checkpoint, restore_policy
from core.errors import SizeLimitError, UsageError
from core.inference import solve_beam, solve_greedy
from core.models import SolveMethod, SwapStrategy
from core.policy import PolicyModel
from core.qap import EXACT_SIZE_LIMIT, Assignment, QapInstance, exact_solve


class SolveService:
    """Builds solvers by method name and runs them over datasets; deps are injected."""

    def __init__(
        self,
        *,
        logger: logging.Logger,
        threads: int = 1,
        clock: ClockProtocol = time.perf_counter,
    ) -> None:
        self._logger = logger
        self._threads = max(1, threads)
        self._clock = clock

    def build_solver(
        self,
        method: SolveMethod,
        *,
        n: int,
        beam: int = 1,
        checkpoint: str | None = None,
    ) -> SolverProtocol:
        """Resolve a method name to a solver; model loading happens here, not per solve."""
        if method == "swap":
            return _SwapSolver("first")
        if method == "swap-best":
            return _SwapSolver("best")
        if method == "exact":
            if n > EXACT_SIZE_LIMIT:
                raise SizeLimitError(n=n, limit=EXACT_SIZE_LIMIT)
            return exact_solve
        if checkpoint is None:
            raise UsageError(f"method {method} needs --checkpoint")
        if beam < 1:
            raise UsageError(f"--beam must be at least 1, got {beam}")
        policy = restore_policy(load_checkpoint(checkpoint, expected_n=n))
        self._logger.info("checkpoint loaded", extra={"path": checkpoint, "n": n})
        if method == "rl-greedy":
            return _GreedySolver(policy)
        return _BeamSolver(policy, beam)

    def solve_all(
        self,
        solver: SolverProtocol,
        instances: Sequence[QapInstance],
        *,
        method: str,
    ) -> list[SolveRecord]:
        """Solve every instance; wall time covers the solver call only."""

        def run(idx: int) -> SolveRecord:
            started = self._clock()
            assignment, cost = solver(instances[idx])
            elapsed = max(0.0, self._clock() - started)
            return SolveRecord(idx=idx, cost=cost, seconds=elapsed, perm=assignment.perm)

        indices = range(len(instances))
        if self._threads == 1:
            records = [run(i) for i in indices]
        else:
            with ThreadPoolExecutor(max_workers=self._threads) as pool:
                records = list(pool.map(run, indices))
        self._logger.info(
            "solve finished",
            extra={"method": method, "instance": len(records), "seconds": sum(r.seconds for r in records)},
        )
        return records


class _SwapSolver:
    def __init__(self, strategy: SwapStrategy) -> None:
        self._strategy: SwapStrategy = strategy

    def __call__(self, instance: QapInstance) -> tuple[Assignment, float]:
        result = swap_solve(instance, strategy=self._strategy)
        return result.assignment, result.cost


class _GreedySolver:
    def __init__(self, policy: PolicyModel) -> None:
        self._policy = policy

    def __call__(self, instance: QapInstance) -> tuple[Assignment, float]:
        return solve_greedy(self._policy, instance)


class _BeamSolver:
    def __init__(self, policy: PolicyModel, width: int) -> None:
        self._policy = policy
        self._width = width

    def __call__(self, instance: QapInstance) -> tuple[Assignment, float]:
        return solve_beam(self._policy, instance, self._width)
