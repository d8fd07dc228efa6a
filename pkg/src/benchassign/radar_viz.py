"""Radar charts of benches and configurations as SVG 1.1.

One spoke per leaf dimension (canonical order, refinements in place of their
parent), one ring per stage, one dot per element. Elements sharing a spot are
spread tangentially by a fixed offset indexed by their sorted id. A
configuration is drawn as one dashed closed polygon through its dots.
Output is a pure function of the inputs; numbers are printed with two decimals.
"""

from __future__ import annotations

import math
from collections import defaultdict
from xml.sax.saxutils import escape, quoteattr

from benchassign.errors import BenchAssignError
from benchassign.model import (
    STAGE_COORDINATES,
    Dimension,
    Stage,
    TestBench,
    TestBenchConfiguration,
    validate_configuration,
    validate_test_bench,
)

CANVAS = 800
CENTER = CANVAS / 2
RADIUS = 230.0
JITTER = 12.0
LABEL_GAP = 18.0

STYLE = """
svg { font-family: sans-serif; font-size: 13px; }
.ring { fill: none; stroke: #b0b0b0; stroke-width: 1; }
.ring-label { fill: #808080; font-size: 11px; }
.spoke { stroke: #606060; stroke-width: 1; }
.spoke-label { fill: #202020; font-size: 11px; }
.element { fill: #4a6fa5; stroke: #ffffff; stroke-width: 1; }
.highlight { fill: none; stroke: #e07b00; stroke-width: 2.5; stroke-dasharray: 8 5; }
.title { font-size: 16px; font-weight: bold; }
""".strip("\n")


def _f(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _angle(i: int, n: int) -> float:
    # first spoke points up, then clockwise
    return -math.pi / 2 + 2 * math.pi * i / n


def _stage_radius(stage: Stage) -> float:
    return RADIUS * STAGE_COORDINATES[stage] / max(STAGE_COORDINATES.values())


def element_positions(bench: TestBench) -> dict[str, tuple[float, float]]:
    """Dot centre per element id, jitter included."""
    leaves = bench.leaf_dimensions()
    index = {leaf: i for i, leaf in enumerate(leaves)}
    groups: dict[tuple[Dimension, Stage], list[str]] = defaultdict(list)
    for e in bench.elements:
        groups[(e.dimension, e.stage)].append(e.id)

    positions = {}
    for (dim, stage), ids in groups.items():
        if dim not in index:
            continue
        theta = _angle(index[dim], len(leaves))
        r = _stage_radius(stage)
        ux, uy = math.cos(theta), math.sin(theta)
        tx, ty = -uy, ux
        ids = sorted(ids)
        for k, element_id in enumerate(ids):
            offset = (k - (len(ids) - 1) / 2) * JITTER
            positions[element_id] = (CENTER + r * ux + offset * tx, CENTER + r * uy + offset * ty)
    return positions


def render_radar(bench: TestBench, highlight: TestBenchConfiguration | None = None) -> str:
    report = validate_test_bench(bench)
    if not report.ok:
        first = report.findings[0]
        raise BenchAssignError(first.code, f"{first.subject}: {first.message}", findings=report.findings)
    if highlight is not None:
        report = validate_configuration(highlight, bench)
        if not report.ok:
            first = report.findings[0]
            raise BenchAssignError(first.code, f"{first.subject}: {first.message}", findings=report.findings)

    leaves = bench.leaf_dimensions()
    n = len(leaves)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{CANVAS}" height="{CANVAS}" '
        f'viewBox="0 0 {CANVAS} {CANVAS}">',
        f"<style>\n{STYLE}\n</style>",
        f'<text class="title" x="20.00" y="30.00">{escape(bench.id)}'
        + (f" / {escape(highlight.id)}" if highlight is not None else "")
        + "</text>",
        '<g id="rings">',
    ]
    for stage in sorted(Stage, key=lambda s: STAGE_COORDINATES[s]):
        r = _stage_radius(stage)
        out.append(f'<circle class="ring" cx="{_f(CENTER)}" cy="{_f(CENTER)}" r="{_f(r)}"/>')
        out.append(
            f'<text class="ring-label" x="{_f(CENTER + 4)}" y="{_f(CENTER - r - 4)}">'
            f"{STAGE_COORDINATES[stage]} = {stage.value}</text>"
        )
    out.append("</g>")

    out.append('<g id="spokes">')
    for i, leaf in enumerate(leaves):
        theta = _angle(i, n)
        ux, uy = math.cos(theta), math.sin(theta)
        out.append(
            f'<line class="spoke" x1="{_f(CENTER)}" y1="{_f(CENTER)}" '
            f'x2="{_f(CENTER + RADIUS * ux)}" y2="{_f(CENTER + RADIUS * uy)}"/>'
        )
        anchor = "middle" if abs(ux) < 0.3 else ("start" if ux > 0 else "end")
        lx, ly = CENTER + (RADIUS + LABEL_GAP) * ux, CENTER + (RADIUS + LABEL_GAP) * uy + 4
        out.append(f'<text class="spoke-label" x="{_f(lx)}" y="{_f(ly)}" text-anchor="{anchor}">{escape(leaf.key)}</text>')
    out.append("</g>")

    positions = element_positions(bench)
    out.append('<g id="elements">')
    for e in sorted(bench.elements, key=lambda e: e.id):
        x, y = positions[e.id]
        out.append(
            f'<circle class="element" cx="{_f(x)}" cy="{_f(y)}" r="6.00" data-element={quoteattr(e.id)}>'
            f"<title>{escape(e.id)} ({escape(e.dimension.key)}, {e.stage.value})</title></circle>"
        )
    out.append("</g>")

    if highlight is not None:
        points = " ".join(f"{_f(x)},{_f(y)}" for x, y in (positions[highlight.selection[leaf.key]] for leaf in leaves))
        out.append(f'<polygon class="highlight" points="{points}" data-configuration={quoteattr(highlight.id)}/>')

    out.append("</svg>")
    return "\n".join(out) + "\n"
