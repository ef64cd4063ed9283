"""Koopmans-Beckman QAP: instances, assignments, objective and exact search.

Orientation: an ``Assignment`` maps location -> facility, i.e. ``perm[k]`` is
the facility placed at location ``k``. The binary matrix form uses
``X[i][k] == 1`` iff facility ``i`` sits at location ``k``; the two views are
related by ``X[perm[k]][k] == 1``.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Final

import numpy as np
from numpy.typing import NDArray

from core.errors import InvalidInputError, SizeLimitError

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]

EXACT_SIZE_LIMIT: Final[int] = 11


def _frozen(values: FloatArray) -> FloatArray:
    out = np.array(values, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def distance_matrix(coords: FloatArray) -> FloatArray:
    """Pairwise Euclidean distances between the rows of an n x 2 matrix."""
    pts = np.asarray(coords, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise InvalidInputError(f"coords must be an n x 2 matrix, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("coords contain non-finite values")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    # exact symmetry regardless of summation order
    dist = np.triu(dist, k=1)
    return dist + dist.T


@dataclass(frozen=True, eq=False)
class QapInstance:
    """A symmetric QAP instance; arrays are read-only after construction."""

    n: int
    coords: FloatArray
    flows: FloatArray
    distances: FloatArray

    @staticmethod
    def from_arrays(coords: FloatArray, flows: FloatArray) -> QapInstance:
        pts = np.asarray(coords, dtype=np.float64)
        flw = np.asarray(flows, dtype=np.float64)
        dist = distance_matrix(pts)
        n = pts.shape[0]
        if flw.shape != (n, n):
            raise InvalidInputError(f"flows must be {n} x {n}, got {flw.shape}")
        if not np.all(np.isfinite(flw)):
            raise InvalidInputError("flows contain non-finite values")
        if not np.array_equal(flw, flw.T):
            raise InvalidInputError("flows must be symmetric")
        if np.any(np.diag(flw) != 0.0):
            raise InvalidInputError("flows must have a zero diagonal")
        if np.any(flw < 0.0):
            raise InvalidInputError("flows must be nonnegative")
        return QapInstance(
            n=n, coords=_frozen(pts), flows=_frozen(flw), distances=_frozen(dist)
        )


@dataclass(frozen=True)
class Assignment:
    """Permutation with ``perm[k]`` = facility at location ``k``."""

    perm: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.perm) != list(range(len(self.perm))):
            raise InvalidInputError(f"not a permutation: {list(self.perm)}")

    @staticmethod
    def of(values: Sequence[int] | IntArray) -> Assignment:
        return Assignment(perm=tuple(int(v) for v in values))

    @staticmethod
    def identity(n: int) -> Assignment:
        return Assignment(perm=tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.perm)

    def as_array(self) -> IntArray:
        return np.asarray(self.perm, dtype=np.int64)

    def locations(self) -> IntArray:
        """Inverse view: ``locations()[i]`` is the location of facility ``i``."""
        inv = np.empty(self.n, dtype=np.int64)
        inv[self.as_array()] = np.arange(self.n, dtype=np.int64)
        return inv

    def matrix(self) -> FloatArray:
        """Binary X with ``X[i][k] == 1`` iff facility i is at location k."""
        x = np.zeros((self.n, self.n), dtype=np.float64)
        x[self.as_array(), np.arange(self.n)] = 1.0
        return x


def _check_sizes(instance: QapInstance, assignment: Assignment) -> None:
    if assignment.n != instance.n:
        raise InvalidInputError(
            f"assignment size {assignment.n} does not match instance size {instance.n}"
        )


def objective(instance: QapInstance, assignment: Assignment) -> float:
    """Sum over (k, l) of F[perm[k]][perm[l]] * D[k][l]."""
    _check_sizes(instance, assignment)
    p = assignment.as_array()
    return float(np.sum(instance.flows[np.ix_(p, p)] * instance.distances))


def pair_cost(cost: float) -> float:
    """``cost`` with every unordered facility pair counted once.

    ``objective`` sums ordered pairs over symmetric flows and distances, so
    each pair contributes twice.
    """
    return cost / 2.0


def objective_matrix(instance: QapInstance, assignment: Assignment) -> float:
    """The same objective as F . (X D X^T) using explicit matrix products."""
    _check_sizes(instance, assignment)
    x = assignment.matrix()
    return float(np.sum(instance.flows * (x @ instance.distances @ x.T)))


def generate_instance(rng: np.random.Generator, n: int) -> QapInstance:
    """Draw coordinates in the unit square and a symmetrized uniform flow matrix.

    Draw order is part of the dataset contract: coordinates (n x 2) first,
    then the raw n x n flow matrix.
    """
    if n < 2:
        raise InvalidInputError(f"n must be at least 2, got {n}")
    coords = rng.random((n, 2))
    raw = rng.random((n, n))
    flows = raw + raw.T
    np.fill_diagonal(flows, 0.0)
    return QapInstance.from_arrays(coords, flows)


def exact_solve(instance: QapInstance) -> tuple[Assignment, float]:
    """Exhaustive branch-and-bound over all n! assignments.

    Locations are filled in index order; a branch is cut as soon as its
    accumulated cost reaches the incumbent.
    """
    n = instance.n
    if n > EXACT_SIZE_LIMIT:
        raise SizeLimitError(n=n, limit=EXACT_SIZE_LIMIT)
    flows = instance.flows
    dist = instance.distances

    perm = np.zeros(n, dtype=np.int64)
    used = [False] * n
    partial = [0.0] * (n + 1)
    next_choice = [0] * (n + 1)
    best_cost = math.inf
    best = np.arange(n, dtype=np.int64)

    depth = 0
    while depth >= 0:
        if depth == n:
            if partial[n] < best_cost:
                best_cost = partial[n]
                best = perm.copy()
            depth -= 1
            used[int(perm[depth])] = False
            continue
        f = next_choice[depth]
        while f < n and used[f]:
            f += 1
        if f >= n:
            depth -= 1
            if depth >= 0:
                used[int(perm[depth])] = False
            continue
        next_choice[depth] = f + 1
        inc = 2.0 * float(np.dot(flows[f, perm[:depth]], dist[depth, :depth]))
        cost = partial[depth] + inc
        if cost >= best_cost:
            continue
        perm[depth] = f
        used[f] = True
        partial[depth + 1] = cost
        depth += 1
        next_choice[depth] = 0

    result = Assignment.of(best)
    return result, objective(instance, result)
