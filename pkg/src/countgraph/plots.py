"""CSV and dependency-free SVG renderings of the eight learned function shapes."""

from __future__ import annotations

import csv
import io
from typing import Sequence

from .counting import CountParams
from .plf import plf_sample

SVG_SIZE = 400
_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def function_table(params: CountParams, k: int) -> tuple[list[float], list[list[float]]]:
    """Sample grid and one column of values per function."""
    samples = [plf_sample(f, k) for f in params.fs]
    xs = [x for x, _ in samples[0]]
    return xs, [[y for _, y in col] for col in samples]


def functions_csv(params: CountParams, k: int) -> str:
    xs, cols = function_table(params, k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x"] + [f"f{i}" for i in range(1, len(cols) + 1)])
    for row, x in enumerate(xs):
        writer.writerow([repr(x)] + [repr(col[row]) for col in cols])
    return buf.getvalue()


def _to_view(x: float, y: float) -> tuple[float, float]:
    # y axis flipped so that (0, 0) sits bottom-left
    return x * SVG_SIZE, (1.0 - y) * SVG_SIZE


def functions_svg(params: CountParams, k: int, labels: Sequence[str] | None = None) -> str:
    xs, cols = function_table(params, k)
    labels = labels or [f"f{i}" for i in range(1, len(cols) + 1)]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}" '
        f'width="{SVG_SIZE}" height="{SVG_SIZE}">',
        f'<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white" stroke="black"/>',
    ]
    for i, (label, col) in enumerate(zip(labels, cols)):
        pts = " ".join("{:.4f},{:.4f}".format(*_to_view(x, y)) for x, y in zip(xs, col))
        color = _COLORS[i % len(_COLORS)]
        parts.append(f'<polyline data-label="{label}" fill="none" stroke="{color}" points="{pts}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
