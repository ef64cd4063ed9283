from __future__ import annotations

import logging
from pathlib import Path

import pytest

from cli.services import SolveService
from core.baselines import swap_solve
from core.checkpoint import capture, load_checkpoint, restore_policy, save_checkpoint
from core.config import PolicyConfig, TrainConfig
from core.critic import CriticModel
from core.errors import CompatibilityError, SizeLimitError, UsageError
from core.inference import solve_beam, solve_greedy
from core.nn import AdamState
from core.qap import Assignment, QapInstance, exact_solve
from core.rng import make_rng
from tests.helpers import make_instance, make_policy


class _StepClock:
    def __init__(self) -> None:
        self.ticks = 0

    def __call__(self) -> float:
        self.ticks += 1
        return self.ticks * 0.25


def _service(threads: int = 1) -> SolveService:
    return SolveService(logger=logging.getLogger("test.services"), threads=threads)


def _checkpoint(tmp_path: Path, n: int) -> str:
    config = TrainConfig(
        n=n, train_path="t", validation_path="v", policy=PolicyConfig(d_k=8, d_i=8)
    )
    policy = make_policy(n, config.policy)
    critic = CriticModel(n, rng=make_rng(0, 1))
    ckpt = capture(
        config,
        policy,
        critic,
        epoch=1,
        metric=0.0,
        policy_optimizer=AdamState(),
        critic_optimizer=AdamState(),
    )
    path = tmp_path / "best.qapckpt"
    save_checkpoint(path, ckpt)
    return str(path)


def test_swap_records_use_the_injected_clock() -> None:
    service = SolveService(logger=logging.getLogger("test.services"), clock=_StepClock())
    instances = [make_instance(5, seed=s) for s in range(3)]
    records = service.solve_all(service.build_solver("swap", n=5), instances, method="swap")
    assert [r.idx for r in records] == [0, 1, 2]
    assert all(r.seconds == 0.25 for r in records)
    for record, inst in zip(records, instances):
        expected = swap_solve(inst, strategy="first")
        assert record.cost == expected.cost
        assert record.perm == expected.assignment.perm


def test_threaded_solving_keeps_instance_order() -> None:
    instances = [make_instance(6, seed=s) for s in range(12)]
    solver = _service().build_solver("swap-best", n=6)
    single = _service().solve_all(solver, instances, method="swap-best")
    pooled = _service(threads=4).solve_all(solver, instances, method="swap-best")
    assert [(r.idx, r.cost, r.perm) for r in pooled] == [(r.idx, r.cost, r.perm) for r in single]


def test_exact_is_guarded_by_size() -> None:
    solver = _service().build_solver("exact", n=4)
    inst = make_instance(4, seed=1)
    assert solver(inst) == exact_solve(inst)
    with pytest.raises(SizeLimitError, match="exceeds limit 11"):
        _service().build_solver("exact", n=12)


def test_policy_methods_need_a_checkpoint() -> None:
    with pytest.raises(UsageError, match="--checkpoint"):
        _service().build_solver("rl-greedy", n=4)


def test_policy_methods_load_the_checkpoint(tmp_path: Path) -> None:
    path = _checkpoint(tmp_path, 4)
    inst = make_instance(4, seed=3)
    restored = restore_policy(load_checkpoint(path))
    greedy = _service().build_solver("rl-greedy", n=4, checkpoint=path)
    beam = _service().build_solver("rl-beam", n=4, beam=3, checkpoint=path)
    assert greedy(inst) == solve_greedy(restored, inst)
    assert beam(inst) == solve_beam(restored, inst, 3)


def test_policy_size_mismatch(tmp_path: Path) -> None:
    path = _checkpoint(tmp_path, 4)
    with pytest.raises(CompatibilityError):
        _service().build_solver("rl-greedy", n=5, checkpoint=path)
    with pytest.raises(UsageError, match="--beam"):
        _service().build_solver("rl-beam", n=4, beam=0, checkpoint=path)


def test_stub_solver_runs_through_the_service() -> None:
    def stub(instance: QapInstance) -> tuple[Assignment, float]:
        return Assignment.identity(instance.n), 1.5

    records = _service(threads=2).solve_all(stub, [make_instance(3)] * 4, method="stub")
    assert [r.cost for r in records] == [1.5] * 4
    assert all(r.perm == (0, 1, 2) for r in records)
