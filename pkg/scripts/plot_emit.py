#!/usr/bin/env python3
"""
Plot Emitter

Renders escape traces as SVG 1.1: the boundary (polygon outline or line
segment), the dashed minimum-radius turn circles at the start pose, every
tied path, and the optimal path on top.

Screen y points down, so the world is drawn through a y-flipping
transform. The transform is stored on the root element as
``data-world-to-screen="matrix(a,0,0,d,e,f)"`` so read_svg_paths can map
the drawing back to world coordinates.
"""

import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional, Sequence

import svgwrite

# Handle both package and standalone execution
try:
    from .escape_geometry import EdgeFrame, GlobalPose, Vec2
except ImportError:
    from escape_geometry import EdgeFrame, GlobalPose, Vec2


SVG_NS = "{http://www.w3.org/2000/svg}"
TRANSFORM_ATTR = "data-world-to-screen"

BOUNDARY_CLASS = "boundary"
TURN_CIRCLE_CLASS = "turn-circle"
TIE_CLASS = "tie-path"
OPTIMAL_CLASS = "optimal-path"

_MATRIX = re.compile(r"matrix\(([^)]*)\)")


@dataclass
class TraceScene:
    """Everything drawn in one trace plot, in world coordinates."""

    start: GlobalPose
    min_turn_radius: float
    optimal_path: list[Vec2]
    tie_paths: list[list[Vec2]] = field(default_factory=list)
    polygon: Optional[Sequence[Vec2]] = None
    line: Optional[EdgeFrame] = None


def turn_circle_centers(pose: GlobalPose, radius: float) -> tuple[Vec2, Vec2]:
    """Centers of the left (u = +1) and right (u = -1) minimum-radius circles."""
    (px, py), h = pose.position, pose.heading
    ox, oy = -radius * math.sin(h), radius * math.cos(h)
    return (px + ox, py + oy), (px - ox, py - oy)


def _line_segment(frame: EdgeFrame, points: Sequence[Vec2]) -> list[Vec2]:
    """Piece of an infinite line long enough to span the drawn points."""
    (ox, oy), (tx, ty) = frame.origin, frame.tangent
    offsets = [(x - ox) * tx + (y - oy) * ty for x, y in points] or [0.0]
    lo, hi = min(offsets), max(offsets)
    pad = max(1.0, 0.25 * (hi - lo))
    return [(ox + (lo - pad) * tx, oy + (lo - pad) * ty), (ox + (hi + pad) * tx, oy + (hi + pad) * ty)]


def render_svg(scene: TraceScene, width: float = 640, margin: float = 24) -> str:
    """
    Render a trace scene to an SVG document string.

    Args:
        scene: Paths and boundary in world coordinates.
        width: Drawing width in pixels.
        margin: Blank border in pixels.

    Returns:
        SVG 1.1 text.
    """
    radius = scene.min_turn_radius
    centers = turn_circle_centers(scene.start, radius)

    drawn = list(scene.optimal_path)
    for path in scene.tie_paths:
        drawn.extend(path)
    drawn.append(scene.start.position)
    boundary = list(scene.polygon) if scene.polygon is not None else _line_segment(scene.line, drawn)

    xs = [p[0] for p in drawn + boundary] + [c[0] + d for c in centers for d in (-radius, radius)]
    ys = [p[1] for p in drawn + boundary] + [c[1] + d for c in centers for d in (-radius, radius)]
    min_x, max_x, min_y, max_y = min(xs), max(xs), min(ys), max(ys)
    span = max(max_x - min_x, max_y - min_y) or 1.0

    scale = (width - 2 * margin) / span
    tx = margin - scale * min_x
    ty = margin + scale * max_y
    height = scale * (max_y - min_y) + 2 * margin

    def to_screen(points: Sequence[Vec2]) -> list[tuple[float, float]]:
        return [(scale * x + tx, -scale * y + ty) for x, y in points]

    dwg = svgwrite.Drawing(size=(width, height), profile="full", debug=False)
    dwg.attribs[TRANSFORM_ATTR] = f"matrix({scale!r},0,0,{-scale!r},{tx!r},{ty!r})"

    if scene.polygon is not None:
        dwg.add(dwg.polygon(
            points=to_screen(boundary),
            class_=BOUNDARY_CLASS,
            stroke="#111",
            fill="none",
            stroke_width=1.5
        ))
    else:
        dwg.add(dwg.polyline(
            points=to_screen(boundary),
            class_=BOUNDARY_CLASS,
            stroke="#111",
            fill="none",
            stroke_width=1.5
        ))

    circles = dwg.g(id="turn_circles", fill="none", stroke="#777")
    for center in centers:
        (cx, cy), = to_screen([center])
        circles.add(dwg.circle(
            center=(cx, cy),
            r=scale * radius,
            class_=TURN_CIRCLE_CLASS,
            stroke_dasharray="4,3"
        ))
    dwg.add(circles)

    ties = dwg.g(id="tie_paths", fill="none", stroke="#39c", opacity=0.8)
    for path in scene.tie_paths:
        ties.add(dwg.polyline(points=to_screen(path), class_=TIE_CLASS, stroke_width=1.5))
    dwg.add(ties)

    dwg.add(dwg.polyline(
        points=to_screen(scene.optimal_path),
        class_=OPTIMAL_CLASS,
        stroke="#d11",
        fill="none",
        stroke_width=2.5,
        stroke_linecap="round",
        stroke_linejoin="round"
    ))
    return dwg.tostring()


def read_svg_paths(text: str) -> dict[str, list[list[Vec2]]]:
    """
    Recover world-coordinate polylines from an SVG written by render_svg.

    Returns:
        Mapping of stroke class to its polylines, in document order.
    """
    root = ET.fromstring(text)
    match = _MATRIX.fullmatch(root.get(TRANSFORM_ATTR, ""))
    if match is None:
        raise ValueError(f"SVG has no {TRANSFORM_ATTR} transform")
    a, _, _, d, e, f = (float(part) for part in match.group(1).split(","))

    paths: dict[str, list[list[Vec2]]] = {}
    for element in root.iter():
        if element.tag not in (SVG_NS + "polyline", SVG_NS + "polygon"):
            continue
        points = []
        for pair in element.get("points", "").split():
            sx, sy = pair.split(",")
            points.append(((float(sx) - e) / a, (float(sy) - f) / d))
        paths.setdefault(element.get("class", ""), []).append(points)
    return paths
