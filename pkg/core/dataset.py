"""Line-delimited text dataset format.

Line 1 is ``qapds v1 seed=<u64> n=<int> count=<int> rng=<name>``; every
following line holds one instance as ``n``, the 2n coordinates in row order,
then the n(n-1)/2 upper-triangular flows in row order. Reals are written with
17 significant digits so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import hashlib
import re
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Final

import numpy as np

from core.errors import (
    DatasetCorruptionError,
    DatasetParseError,
    InvalidInputError,
)
from core.qap import QapInstance, generate_instance
from core.rng import RNG_NAME, dataset_rng

_MAGIC: Final[str] = "qapds v1"
_HEADER_RE: Final[re.Pattern[str]] = re.compile(
    r"^qapds v1 seed=(\d+) n=(\d+) count=(\d+) rng=(\S+)$"
)


@dataclass(frozen=True)
class DatasetHeader:
    seed: int
    n: int
    count: int
    rng_name: str = RNG_NAME

    def __post_init__(self) -> None:
        if self.count < 1:
            raise InvalidInputError(f"count must be at least 1, got {self.count}")
        if self.n < 1:
            raise InvalidInputError(f"n must be positive, got {self.n}")

    def render(self) -> str:
        return (
            f"{_MAGIC} seed={self.seed} n={self.n} count={self.count} "
            f"rng={self.rng_name}"
        )


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def encode_instance(instance: QapInstance) -> str:
    n = instance.n
    iu = np.triu_indices(n, k=1)
    parts = [str(n)]
    parts.extend(_fmt(v) for v in instance.coords.ravel())
    parts.extend(_fmt(v) for v in instance.flows[iu])
    return " ".join(parts)


def decode_instance(text: str, *, path: str, line: int) -> QapInstance:
    tokens = text.split()
    if not tokens:
        raise DatasetParseError("empty instance record", path=path, line=line)
    try:
        n = int(tokens[0])
        values = [float(tok) for tok in tokens[1:]]
    except ValueError as exc:
        raise DatasetParseError(f"non-numeric token ({exc})", path=path, line=line) from exc
    expected = 2 * n + n * (n - 1) // 2
    if n < 1 or len(values) != expected:
        raise DatasetParseError(
            f"expected {expected} values for n={n}, found {len(values)}",
            path=path,
            line=line,
        )
    coords = np.asarray(values[: 2 * n], dtype=np.float64).reshape(n, 2)
    upper = np.zeros((n, n), dtype=np.float64)
    upper[np.triu_indices(n, k=1)] = values[2 * n :]
    try:
        return QapInstance.from_arrays(coords, upper + upper.T)
    except InvalidInputError as exc:
        raise DatasetParseError(str(exc), path=path, line=line) from exc


def generate_dataset(seed: int, n: int, count: int) -> tuple[DatasetHeader, list[QapInstance]]:
    """Draw ``count`` instances of size ``n`` from one PCG64 stream."""
    header = DatasetHeader(seed=seed, n=n, count=count)
    rng = dataset_rng(seed)
    return header, [generate_instance(rng, n) for _ in range(count)]


def save_dataset(
    path: str | Path, header: DatasetHeader, instances: Sequence[QapInstance]
) -> None:
    if len(instances) != header.count:
        raise InvalidInputError(
            f"header count {header.count} does not match {len(instances)} instances"
        )
    for inst in instances:
        if inst.n != header.n:
            raise InvalidInputError(f"instance size {inst.n} does not match n={header.n}")
    dest = Path(path)
    dest.parent.mkdir(parents=True, exist_ok=True)
    with dest.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header.render() + "\n")
        for inst in instances:
            fh.write(encode_instance(inst) + "\n")


def load_dataset(path: str | Path) -> tuple[DatasetHeader, list[QapInstance]]:
    src = Path(path)
    where = str(src)
    lines = src.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DatasetParseError("missing header", path=where, line=1)
    match = _HEADER_RE.match(lines[0].strip())
    if match is None:
        raise DatasetParseError(f"malformed header {lines[0]!r}", path=where, line=1)
    header = DatasetHeader(
        seed=int(match.group(1)),
        n=int(match.group(2)),
        count=int(match.group(3)),
        rng_name=match.group(4),
    )
    records = lines[1:]
    while records and not records[-1].strip():
        records.pop()
    if len(records) != header.count:
        raise DatasetCorruptionError(
            f"header declares {header.count} instances, found {len(records)}",
            path=where,
        )
    instances: list[QapInstance] = []
    for offset, text in enumerate(records):
        inst = decode_instance(text, path=where, line=offset + 2)
        if inst.n != header.n:
            raise DatasetCorruptionError(
                f"instance size {inst.n} does not match header n={header.n}",
                path=where,
                line=offset + 2,
            )
        instances.append(inst)
    return header, instances


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
