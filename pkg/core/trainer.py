"""Advantage actor-critic training of the pointer policy.

Every training instance in a batch is rolled out on its own tape, so rollouts
can run on a thread pool while the parameters stay read-only. Per-instance
gradients are reduced in instance order and applied once per batch.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.autodiff import (
    Array,
    Tape,
    Tensor,
    constant,
    detach,
    matmul,
    stack,
    total,
)
from core.baselines import percentage_gap, swap_solve
from core.checkpoint import Checkpoint, capture, load_checkpoint, save_checkpoint
from core.config import TrainConfig
from core.critic import CriticModel, state_values
from core.dataset import load_dataset
from core.errors import CompatibilityError, ConfigError, NumericalFailureError
from core.inference import solve_greedy
from core.nn import AdamConfig, AdamState, adam_step
from core.policy import EpisodeTrace, PolicyModel, decode_episode
from core.qap import QapInstance
from core.rng import make_rng

logger = logging.getLogger(__name__)

# stream keys under the training seed
_POLICY_INIT = 0
_CRITIC_INIT = 1
_SHUFFLE = 2
_ROLLOUT = 3


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Costs, chosen log-probabilities, entropies and values of one episode."""

    costs: Array
    log_probs: Tensor
    entropies: Tensor
    values: Tensor

    @staticmethod
    def from_trace(trace: EpisodeTrace, values: Tensor) -> Trajectory:
        return Trajectory(
            costs=np.asarray(trace.costs, dtype=values.data.dtype),
            log_probs=stack(trace.log_prob_terms),
            entropies=stack(trace.entropy_terms),
            values=values,
        )


def advantages(traj: Trajectory, gamma: float) -> Tensor:
    """A_t = -r_t + gamma * V(s_{t+1}) - V(s_t), with V(s_2n) = 0."""
    steps = traj.values.shape[0]
    dtype = traj.values.data.dtype
    shift = constant(np.eye(steps, k=1), dtype)
    rewards = constant(-traj.costs, dtype)
    return rewards + gamma * matmul(shift, traj.values) - traj.values


def trajectory_loss(traj: Trajectory, *, alpha: float, beta: float, gamma: float) -> Tensor:
    adv = advantages(traj, gamma)
    policy_term = -total(traj.log_probs * detach(adv))
    critic_term = alpha * total(adv * adv)
    entropy_term = beta * total(traj.entropies)
    return policy_term + critic_term - entropy_term


def _check_finite(loss: Tensor, diagnostics: dict[str, object]) -> None:
    value = loss.item()
    if not math.isfinite(value):
        raise NumericalFailureError(
            f"non-finite loss {value}", diagnostics={"loss": value, **diagnostics}
        )


def a2c_loss(
    trajectories: Sequence[Trajectory], *, alpha: float, beta: float, gamma: float = 1.0
) -> Tensor:
    """Sum of per-trajectory losses divided by the batch size."""
    if not trajectories:
        raise ConfigError("a2c_loss needs at least one trajectory")
    parts = [trajectory_loss(t, alpha=alpha, beta=beta, gamma=gamma) for t in trajectories]
    summed = parts[0]
    for part in parts[1:]:
        summed = summed + part
    loss = summed * (1.0 / len(trajectories))
    _check_finite(loss, {"batch": len(trajectories)})
    return loss


@dataclass(frozen=True, eq=False)
class _InstanceGradients:
    loss: float
    policy: dict[str, Array]
    critic: dict[str, Array]


def _instance_gradients(
    policy: PolicyModel,
    critic: CriticModel,
    instance: QapInstance,
    rng: np.random.Generator,
    config: TrainConfig,
    index: int,
) -> _InstanceGradients:
    with Tape() as tape:
        trace = decode_episode(
            policy, instance, "sample", rng, training=True, dropout_rate=config.dropout
        )
        values = state_values(critic, instance, trace.states)
        traj = Trajectory.from_trace(trace, values)
        loss = trajectory_loss(traj, alpha=config.alpha, beta=config.beta, gamma=config.gamma)
    _check_finite(loss, {"instance": index, "episode_cost": trace.total_cost})
    grads = tape.backward(loss)
    return _InstanceGradients(
        loss=loss.item(),
        policy=grads.for_params(policy.store.as_mapping()),
        critic=grads.for_params(critic.store.as_mapping()),
    )


def _reduce(parts: Sequence[dict[str, Array]], scale: float) -> dict[str, Array]:
    out: dict[str, Array] = {}
    for part in parts:
        for name, grad in part.items():
            out[name] = out[name] + grad if name in out else grad.copy()
    return {name: grad * scale for name, grad in out.items()}


def _check_gradients(grads: dict[str, Array], epoch: int, batch: int) -> None:
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NumericalFailureError(
            "non-finite gradients", diagnostics={"epoch": epoch, "batch": batch, "params": bad}
        )


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    loss: float
    val_gap: float
    seconds: float

    def render(self) -> str:
        return (
            f"epoch={self.epoch} loss={self.loss!r} val_gap={self.val_gap!r} "
            f"seconds={self.seconds!r}"
        )


@dataclass(frozen=True, eq=False)
class TrainResult:
    best: Checkpoint
    metrics: tuple[EpochMetrics, ...]


def validation_gap(
    policy: PolicyModel,
    instances: Sequence[QapInstance],
    baseline_costs: Sequence[float],
    *,
    pool: ThreadPoolExecutor | None = None,
) -> float:
    """Mean greedy gap against cached baseline costs."""

    def solve(inst: QapInstance) -> float:
        return solve_greedy(policy, inst)[1]

    costs = list(pool.map(solve, instances)) if pool is not None else [solve(i) for i in instances]
    gaps = [percentage_gap(c, b) for c, b in zip(costs, baseline_costs)]
    return float(np.mean(gaps))


def _load_split(path: str, n: int, label: str) -> list[QapInstance]:
    if not Path(path).is_file():
        raise ConfigError(f"{label} dataset not found: {path}", fields=(f"{label}_path",))
    header, instances = load_dataset(path)
    if header.n != n:
        raise CompatibilityError(f"{label} dataset {path} has n={header.n}, config has n={n}")
    return instances


def _best_on_resume(config: TrainConfig, resumed: Checkpoint) -> Checkpoint:
    """Best checkpoint known before a resumed run's first epoch.

    An existing ``checkpoint_path`` from the earlier run competes with the
    resumed epoch, and the file is rewritten when the resumed epoch is better.
    """
    best_path = Path(config.checkpoint_path)
    if not best_path.is_file():
        return resumed
    previous = load_checkpoint(best_path, expected_n=config.n)
    if previous.metric <= resumed.metric:
        return previous
    save_checkpoint(best_path, resumed)
    return resumed


def train(
    config: TrainConfig,
    *,
    threads: int = 1,
    clock: Callable[[], float] = time.perf_counter,
) -> TrainResult:
    """Run ``config.epochs`` epochs and return the checkpoint with the lowest validation gap.

    Every epoch's checkpoint is written to ``checkpoint_dir/epoch_<k>.qapckpt``;
    the best so far is also written to ``checkpoint_path``. A numerical failure
    aborts the run and leaves the files of earlier epochs in place.
    """
    train_set = _load_split(config.train_path, config.n, "train")
    if config.max_train_instances is not None:
        train_set = train_set[: config.max_train_instances]
    val_set = _load_split(config.validation_path, config.n, "validation")
    dtype = np.dtype(config.precision)

    policy = PolicyModel(config.policy, config.n, rng=make_rng(config.seed, _POLICY_INIT), dtype=dtype)
    critic = CriticModel(config.n, rng=make_rng(config.seed, _CRITIC_INIT), dtype=dtype)
    adam = AdamConfig(lr=config.lr)
    policy_opt = AdamState()
    critic_opt = AdamState()
    first_epoch = 1
    best: Checkpoint | None = None

    if config.resume_from is not None:
        resumed = load_checkpoint(config.resume_from, expected_n=config.n)
        policy.store.load(resumed.policy)
        critic.store.load(resumed.critic)
        policy_opt = resumed.policy_optimizer
        critic_opt = resumed.critic_optimizer
        first_epoch = resumed.epoch + 1
        best = _best_on_resume(config, resumed)
        logger.info(
            "resumed training",
            extra={"path": config.resume_from, "epoch": resumed.epoch, "val_gap": resumed.metric},
        )

    baseline_costs = [swap_solve(inst).cost for inst in val_set]
    logger.info(
        "training started",
        extra={"n": config.n, "instance": len(train_set), "epoch": first_epoch},
    )

    metrics_path = Path(config.metrics_path)
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    if config.resume_from is None:
        # a fresh run starts a fresh log; a resumed run extends it
        metrics_path.write_text("", encoding="utf-8")
    checkpoint_dir = Path(config.checkpoint_dir)
    history: list[EpochMetrics] = []
    batch_size = config.batch_size

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for epoch in range(first_epoch, first_epoch + config.epochs):
            started = clock()
            order = make_rng(config.seed, _SHUFFLE, epoch).permutation(len(train_set))
            batch_losses: list[float] = []
            for batch_index, start in enumerate(range(0, len(order), batch_size)):
                members = [int(i) for i in order[start : start + batch_size]]

                def run(pos: int, _epoch: int = epoch) -> _InstanceGradients:
                    return _instance_gradients(
                        policy,
                        critic,
                        train_set[pos],
                        make_rng(config.seed, _ROLLOUT, _epoch, pos),
                        config,
                        pos,
                    )

                results = list(pool.map(run, members))
                scale = 1.0 / len(members)
                policy_grads = _reduce([r.policy for r in results], scale)
                critic_grads = _reduce([r.critic for r in results], scale)
                _check_gradients(policy_grads, epoch, batch_index)
                _check_gradients(critic_grads, epoch, batch_index)
                adam_step(policy.store, policy_grads, policy_opt, adam)
                adam_step(critic.store, critic_grads, critic_opt, adam)
                batch_loss = float(sum(r.loss for r in results)) * scale
                batch_losses.append(batch_loss)
                logger.debug(
                    "batch done", extra={"epoch": epoch, "batch": batch_index, "loss": batch_loss}
                )

            val_gap = validation_gap(policy, val_set, baseline_costs, pool=pool)
            ckpt = capture(
                config,
                policy,
                critic,
                epoch=epoch,
                metric=val_gap,
                policy_optimizer=policy_opt,
                critic_optimizer=critic_opt,
            )
            save_checkpoint(checkpoint_dir / f"epoch_{epoch}.qapckpt", ckpt)
            if best is None or val_gap < best.metric:
                best = ckpt
                save_checkpoint(config.checkpoint_path, ckpt)

            record = EpochMetrics(
                epoch=epoch,
                loss=float(np.mean(batch_losses)),
                val_gap=val_gap,
                seconds=clock() - started,
            )
            history.append(record)
            with metrics_path.open("a", encoding="utf-8", newline="\n") as fh:
                fh.write(record.render() + "\n")
            logger.info(
                "epoch finished",
                extra={
                    "epoch": epoch,
                    "loss": record.loss,
                    "val_gap": val_gap,
                    "seconds": record.seconds,
                },
            )

    if best is None:
        raise ConfigError("training ran no epochs", fields=("epochs",))
    return TrainResult(best=best, metrics=tuple(history))
