"""SVG rendering of an assignment with its heaviest flows."""

from __future__ import annotations

import io
import logging
import string
from pathlib import Path

import numpy as np
from matplotlib import rc_context
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from core.errors import InvalidInputError, UsageError
from core.qap import Assignment, FloatArray, QapInstance

logger = logging.getLogger(__name__)

_RC = {"svg.hashsalt": "qapforge", "svg.fonttype": "none"}


def facility_label(index: int) -> str:
    """Spreadsheet-style labels: A..Z, AA, AB, ..."""
    letters = string.ascii_uppercase
    label = ""
    value = index + 1
    while value > 0:
        value, rem = divmod(value - 1, 26)
        label = letters[rem] + label
    return label


def top_flow_pairs(flows: FloatArray, k: int) -> list[tuple[int, int]]:
    """The ``k`` facility pairs i < j with the largest flow; ties by index order."""
    n = flows.shape[0]
    rows, cols = np.triu_indices(n, k=1)
    weights = flows[rows, cols]
    # lexsort keys: last is primary
    order = np.lexsort((cols, rows, -weights))
    return [(int(rows[o]), int(cols[o])) for o in order[:k]]


def render_assignment_svg(
    instance: QapInstance,
    assignment: Assignment,
    *,
    top_k: int = 20,
    title: str | None = None,
) -> str:
    if assignment.n != instance.n:
        raise InvalidInputError(
            f"assignment size {assignment.n} does not match instance size {instance.n}"
        )
    if top_k < 0:
        raise UsageError(f"--top-k must be nonnegative, got {top_k}")
    n = instance.n
    pairs_available = n * (n - 1) // 2
    if top_k > pairs_available:
        logger.warning(
            "top-k clamped to the number of facility pairs",
            extra={"n": n, "instance": pairs_available},
        )
        top_k = pairs_available

    positions = instance.coords[assignment.locations()]
    pairs = top_flow_pairs(instance.flows, top_k)
    peak = max((instance.flows[i, j] for i, j in pairs), default=1.0) or 1.0

    with rc_context(_RC):
        fig = Figure(figsize=(6, 6))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        ax.set_xlim(-0.05, 1.05)
        ax.set_ylim(-0.05, 1.05)
        ax.set_aspect("equal")
        if title:
            ax.set_title(title)
        for k, (i, j) in enumerate(pairs):
            (edge,) = ax.plot(
                [positions[i, 0], positions[j, 0]],
                [positions[i, 1], positions[j, 1]],
                color="tab:blue",
                alpha=0.7,
                linewidth=0.5 + 2.5 * float(instance.flows[i, j]) / peak,
                zorder=1,
            )
            edge.set_gid(f"edge-{k}")
        for facility in range(n):
            label = facility_label(facility)
            x, y = float(positions[facility, 0]), float(positions[facility, 1])
            (node,) = ax.plot([x], [y], "o", color="tab:red", markersize=14, zorder=2)
            node.set_gid(f"node-{label}")
            text = ax.text(x, y, label, ha="center", va="center", color="white", zorder=3)
            text.set_gid(f"label-{label}")
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue().decode("utf-8")


def write_assignment_svg(
    path: str | Path,
    instance: QapInstance,
    assignment: Assignment,
    *,
    top_k: int = 20,
    title: str | None = None,
) -> None:
    dest = Path(path)
    dest.parent.mkdir(parents=True, exist_ok=True)
    svg = render_assignment_svg(instance, assignment, top_k=top_k, title=title)
    dest.write_text(svg, encoding="utf-8", newline="\n")
