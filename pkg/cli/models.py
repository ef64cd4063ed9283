from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.errors import InvalidInputError
from core.qap import pair_cost


class SolveRecord(BaseModel):
    """One line of a results file."""

    model_config = ConfigDict(frozen=True)

    idx: int = Field(ge=0)
    cost: float
    seconds: float = Field(ge=0.0)
    perm: tuple[int, ...]

    def render(self) -> str:
        perm = ",".join(str(p) for p in self.perm)
        return f"idx={self.idx} cost={self.cost!r} seconds={self.seconds!r} perm={perm}"


class GapSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    p95: float
    within_10pct: float = Field(ge=0.0, le=1.0)
    at_most_zero: float = Field(ge=0.0, le=1.0)
    count: int = Field(ge=1)

    def render(self) -> str:
        header = f"{'count':>7} {'mean gap':>10} {'p95 gap':>10} {'gap<=10%':>9} {'gap<=0%':>8}"
        row = (
            f"{self.count:>7d} {self.mean * 100:>9.2f}% {self.p95 * 100:>9.2f}% "
            f"{self.within_10pct * 100:>8.1f}% {self.at_most_zero * 100:>7.1f}%"
        )
        return f"{header}\n{row}\n"


class MethodRuntime(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: str
    count: int = Field(ge=1)
    mean_cost: float
    cost_stderr: float = Field(ge=0.0)
    mean_pair_cost: float
    mean_seconds: float = Field(ge=0.0)
    seconds_stderr: float = Field(ge=0.0)


class RuntimeSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: tuple[MethodRuntime, ...]

    def render(self) -> str:
        lines = [f"{'method':<12} {'cost':>20} {'pair cost':>10} {'seconds':>24}"]
        for r in self.rows:
            cost = f"{r.mean_cost:.2f} ± {r.cost_stderr:.2f}"
            secs = f"{r.mean_seconds:.4g} ± {r.seconds_stderr:.2g}"
            lines.append(f"{r.method:<12} {cost:>20} {r.mean_pair_cost:>10.2f} {secs:>24}")
        return "\n".join(lines) + "\n"


def nearest_rank(sorted_values: Sequence[float], fraction: float) -> float:
    """Nearest-rank percentile: element ``ceil(fraction * N)`` (1-based) of a sorted list."""
    if not sorted_values:
        raise InvalidInputError("percentile of an empty list")
    rank = max(1, math.ceil(fraction * len(sorted_values)))
    return float(sorted_values[rank - 1])


def summarize_gaps(gaps: Sequence[float]) -> GapSummary:
    if not gaps:
        raise InvalidInputError("no gaps to summarize")
    values = np.asarray(gaps, dtype=np.float64)
    return GapSummary(
        mean=float(np.mean(values)),
        p95=nearest_rank(sorted(float(g) for g in values), 0.95),
        within_10pct=float(np.mean(values <= 0.10)),
        at_most_zero=float(np.mean(values <= 0.0)),
        count=len(values),
    )


def standard_error(values: Sequence[float]) -> float:
    """Sample standard deviation over sqrt(count); 0 for a single value."""
    if len(values) < 2:
        return 0.0
    return float(np.std(np.asarray(values, dtype=np.float64), ddof=1)) / math.sqrt(len(values))


def summarize_runtime(method: str, records: Sequence[SolveRecord]) -> MethodRuntime:
    if not records:
        raise InvalidInputError(f"no records for method {method}")
    costs = [r.cost for r in records]
    seconds = [r.seconds for r in records]
    return MethodRuntime(
        method=method,
        count=len(records),
        mean_cost=float(np.mean(costs)),
        cost_stderr=standard_error(costs),
        mean_pair_cost=pair_cost(float(np.mean(costs))),
        mean_seconds=float(np.mean(seconds)),
        seconds_stderr=standard_error(seconds),
    )
