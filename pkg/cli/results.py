"""Results files: one ``idx=<int> cost=<real> seconds=<real> perm=<ints>`` line per instance."""

from __future__ import annotations

import re
from collections.abc import Sequence
from pathlib import Path
from typing import Final

from pydantic import ValidationError

from cli.models import SolveRecord
from core.errors import AlignmentError, DatasetParseError

_LINE_RE: Final[re.Pattern[str]] = re.compile(
    r"^idx=(\d+) cost=(\S+) seconds=(\S+) perm=(\d+(?:,\d+)*)$"
)


def write_results(path: str | Path, records: Sequence[SolveRecord]) -> None:
    dest = Path(path)
    dest.parent.mkdir(parents=True, exist_ok=True)
    with dest.open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(record.render() + "\n")


def parse_record(text: str, *, path: str, line: int) -> SolveRecord:
    match = _LINE_RE.match(text.strip())
    if match is None:
        raise DatasetParseError(f"malformed result record {text!r}", path=path, line=line)
    try:
        return SolveRecord(
            idx=int(match.group(1)),
            cost=float(match.group(2)),
            seconds=float(match.group(3)),
            perm=tuple(int(p) for p in match.group(4).split(",")),
        )
    except (ValueError, ValidationError) as exc:
        raise DatasetParseError(f"invalid result record ({exc})", path=path, line=line) from exc


def read_results(path: str | Path) -> list[SolveRecord]:
    src = Path(path)
    where = str(src)
    records: list[SolveRecord] = []
    for lineno, text in enumerate(src.read_text(encoding="utf-8").splitlines(), start=1):
        if text.strip():
            records.append(parse_record(text, path=where, line=lineno))
    return records


def check_aligned(solutions: Sequence[SolveRecord], baseline: Sequence[SolveRecord]) -> None:
    """Both files must cover the same instances, in the same order."""
    if len(solutions) != len(baseline):
        raise AlignmentError(
            f"solutions cover {len(solutions)} instances, baseline covers {len(baseline)}"
        )
    for position, (sol, base) in enumerate(zip(solutions, baseline)):
        if sol.idx != base.idx:
            raise AlignmentError(
                f"record {position}: solution idx {sol.idx} != baseline idx {base.idx}"
            )
        if len(sol.perm) != len(base.perm):
            raise AlignmentError(
                f"record {position}: instance sizes differ ({len(sol.perm)} vs {len(base.perm)})"
            )
