#!/usr/bin/env python3
"""
Escape Geometry Module

Poses, angle arithmetic, convex polygon validation and the edge-local
coordinate frames used by the escape solvers.

Edge-local frame conventions:
- x is the signed offset along the edge's outward normal (negative inside)
- y runs along the tangent, the outward normal rotated +90 degrees
  (the counter-clockwise edge direction)
- headings are measured from the outward normal, wrapped to (-pi, pi]

All types are immutable; every function here is pure.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from loguru import logger


Vec2 = tuple[float, float]

TWO_PI = 2.0 * math.pi

# Relative geometric tolerance, scaled by the polygon diameter
DEFAULT_EPS_REL = 1e-9
# Absolute tolerance when there is no length scale (lone lines)
DEFAULT_EPS_GEOM = 1e-9

# Exterior angles of a simple convex polygon add up to one full turn
_TOTAL_TURN_TOL = 1e-6


class EscapeError(ValueError):
    """
    Base class for all solver errors.

    Every subclass carries a stable, machine-readable ``code`` that the
    CLI reports in its error objects.
    """

    code = "escape-error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class InvalidArgumentError(EscapeError):
    """Raised for non-finite inputs and out-of-range arguments."""

    code = "invalid-argument"


class PolygonError(EscapeError):
    """Raised when a vertex list does not describe a valid convex polygon."""

    code = "invalid-polygon"


class Containment(str, Enum):
    """Where a point lies relative to a closed polygon."""

    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


def _require_finite(*values: float, what: str = "value") -> None:
    for value in values:
        if not math.isfinite(value):
            raise InvalidArgumentError(f"{what} must be finite, got {value}")


def wrap_angle(a: float) -> float:
    """
    Wrap an angle to the half-open interval (-pi, pi].

    Odd multiples of pi map to +pi, so the heading pointing straight away
    from a line has exactly one representation.

    Args:
        a: Angle in radians.

    Returns:
        Equivalent angle in (-pi, pi].

    Raises:
        InvalidArgumentError: If the angle is NaN or infinite.
    """
    _require_finite(a, what="angle")

    # IEEE remainder is exact and lands in [-pi, pi]
    wrapped = math.remainder(a, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True)
class VehicleParams:
    """Constant speed and minimum turn radius of the vehicle."""

    speed: float
    min_turn_radius: float

    def __post_init__(self):
        _require_finite(self.speed, self.min_turn_radius, what="vehicle parameter")
        if self.speed <= 0:
            raise InvalidArgumentError(f"speed must be positive, got {self.speed}")
        if self.min_turn_radius <= 0:
            raise InvalidArgumentError(
                f"min_turn_radius must be positive, got {self.min_turn_radius}"
            )

    @property
    def turn_rate(self) -> float:
        """Maximum heading rate v / R."""
        return self.speed / self.min_turn_radius


@dataclass(frozen=True)
class GlobalPose:
    """Vehicle position and heading in world coordinates."""

    position: Vec2
    heading: float

    def __post_init__(self):
        px, py = self.position
        _require_finite(px, py, what="position")
        object.__setattr__(self, "position", (float(px), float(py)))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))


@dataclass(frozen=True)
class LineLocalState:
    """
    Reduced state relative to one line.

    ``x`` is the signed normal offset (negative on the inside half-plane),
    ``theta`` the heading measured from the outward normal.
    """

    x: float
    theta: float

    def __post_init__(self):
        _require_finite(self.x, what="x")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))


class EdgeFrame(NamedTuple):
    """Local coordinate frame of a polygon edge (or any infinite line)."""

    origin: Vec2
    outward_normal: Vec2
    tangent: Vec2

    @property
    def normal_angle(self) -> float:
        """Polar angle of the outward normal."""
        return math.atan2(self.outward_normal[1], self.outward_normal[0])


@dataclass(frozen=True)
class ConvexPolygon:
    """
    Validated convex polygon, vertices stored counter-clockwise.

    Build instances with ``validate_polygon``; the constructor does not
    re-check convexity.
    """

    vertices: tuple[Vec2, ...]
    eps_geom: float

    @property
    def edge_count(self) -> int:
        return len(self.vertices)

    @cached_property
    def edges(self) -> tuple[tuple[Vec2, Vec2], ...]:
        n = len(self.vertices)
        return tuple((self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n))

    @property
    def diameter(self) -> float:
        return polygon_diameter(self.vertices)

    @cached_property
    def outward_normals(self) -> np.ndarray:
        """Unit outward normal of every edge, shape (n, 2)."""
        pts = np.asarray(self.vertices, dtype=float)
        edge_vectors = np.roll(pts, -1, axis=0) - pts
        lengths = np.hypot(edge_vectors[:, 0], edge_vectors[:, 1])
        return np.column_stack((edge_vectors[:, 1], -edge_vectors[:, 0])) / lengths[:, None]


def polygon_diameter(vertices: Sequence[Vec2]) -> float:
    """Largest distance between any two vertices."""
    pts = np.asarray(vertices, dtype=float)
    deltas = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((deltas ** 2).sum(axis=-1)).max())


def _signed_area(pts: np.ndarray) -> float:
    nxt = np.roll(pts, -1, axis=0)
    return 0.5 * float(np.sum(pts[:, 0] * nxt[:, 1] - nxt[:, 0] * pts[:, 1]))


def polygon_centroid(polygon: ConvexPolygon) -> Vec2:
    """Area centroid of the polygon."""
    pts = np.asarray(polygon.vertices, dtype=float)
    nxt = np.roll(pts, -1, axis=0)
    cross = pts[:, 0] * nxt[:, 1] - nxt[:, 0] * pts[:, 1]
    area = 0.5 * cross.sum()
    cx = ((pts[:, 0] + nxt[:, 0]) * cross).sum() / (6.0 * area)
    cy = ((pts[:, 1] + nxt[:, 1]) * cross).sum() / (6.0 * area)
    return (float(cx), float(cy))


def validate_polygon(
    vertices: Sequence[Sequence[float]],
    eps_rel: float = DEFAULT_EPS_REL
) -> ConvexPolygon:
    """
    Validate a vertex list and return a counter-clockwise ConvexPolygon.

    Clockwise input is reversed. Collinear consecutive edges are accepted
    and kept as separate edges.

    Args:
        vertices: Ordered (x, y) vertices, either orientation.
        eps_rel: Tolerance relative to the polygon diameter.

    Returns:
        The validated polygon.

    Raises:
        InvalidArgumentError: If coordinates are malformed or non-finite.
        PolygonError: With code too-few-vertices, degenerate-edge or non-convex.
    """
    pts = np.asarray(vertices, dtype=float)
    if pts.size == 0:
        pts = pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidArgumentError("vertices must be a list of (x, y) pairs")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("vertex coordinates must be finite")
    if len(pts) < 3:
        raise PolygonError(
            f"polygon needs at least 3 vertices, got {len(pts)}",
            code="too-few-vertices"
        )

    diameter = polygon_diameter(pts)
    eps = eps_rel * (diameter if diameter > 0 else 1.0)

    edge_vectors = np.roll(pts, -1, axis=0) - pts
    lengths = np.hypot(edge_vectors[:, 0], edge_vectors[:, 1])
    short = np.flatnonzero(lengths <= eps)
    if short.size:
        raise PolygonError(
            f"vertices {int(short[0])} and {int((short[0] + 1) % len(pts))} coincide",
            code="degenerate-edge"
        )

    if _signed_area(pts) < 0:
        logger.debug("Normalizing clockwise polygon to counter-clockwise order")
        pts = pts[::-1].copy()
        edge_vectors = np.roll(pts, -1, axis=0) - pts
        lengths = np.hypot(edge_vectors[:, 0], edge_vectors[:, 1])

    nxt = np.roll(edge_vectors, -1, axis=0)
    cross = edge_vectors[:, 0] * nxt[:, 1] - edge_vectors[:, 1] * nxt[:, 0]
    dot = (edge_vectors * nxt).sum(axis=1)
    # Distance of the vertex after next from each edge's supporting line
    offsets = cross / lengths

    reflex = np.flatnonzero(offsets < -eps)
    if reflex.size:
        vertex = int((reflex[0] + 1) % len(pts))
        raise PolygonError(
            f"reflex vertex at {tuple(pts[vertex])}",
            code="non-convex"
        )
    if np.count_nonzero(offsets > eps) < 3:
        raise PolygonError("polygon has no interior", code="non-convex")

    total_turn = float(np.arctan2(cross, dot).sum())
    if abs(total_turn - TWO_PI) > _TOTAL_TURN_TOL:
        raise PolygonError("boundary winds more than once", code="non-convex")

    return ConvexPolygon(
        vertices=tuple((float(x), float(y)) for x, y in pts),
        eps_geom=eps
    )


def edge_frame(polygon: ConvexPolygon, edge_index: int) -> EdgeFrame:
    """
    Local frame of one polygon edge.

    The origin is the edge's start vertex, the tangent the normalized edge
    direction, and the outward normal the tangent rotated -90 degrees.

    Raises:
        InvalidArgumentError: If edge_index is out of range.
    """
    n = polygon.edge_count
    if not 0 <= edge_index < n:
        raise InvalidArgumentError(
            f"edge index {edge_index} out of range for {n} edges",
            code="index-out-of-range"
        )

    start, end = polygon.edges[edge_index]
    dx, dy = end[0] - start[0], end[1] - start[1]
    length = math.hypot(dx, dy)
    tx, ty = dx / length, dy / length
    return EdgeFrame(origin=start, outward_normal=(ty, -tx), tangent=(tx, ty))


def line_frame(point: Sequence[float], outward_normal: Sequence[float]) -> EdgeFrame:
    """
    Local frame of an infinite line given a point on it and its outward normal.

    Raises:
        InvalidArgumentError: If the inputs are non-finite or the normal is zero.
    """
    px, py = float(point[0]), float(point[1])
    nx, ny = float(outward_normal[0]), float(outward_normal[1])
    _require_finite(px, py, nx, ny, what="line coordinate")

    norm = math.hypot(nx, ny)
    if norm == 0.0:
        raise InvalidArgumentError("outward normal must be non-zero")
    nx, ny = nx / norm, ny / norm
    return EdgeFrame(origin=(px, py), outward_normal=(nx, ny), tangent=(-ny, nx))


def to_edge_frame(pose: GlobalPose, frame: EdgeFrame) -> LineLocalState:
    """
    Express a world pose in an edge's local frame.

    Positive x (pose outside the half-plane) is returned as-is; callers
    decide what that means.
    """
    rx = pose.position[0] - frame.origin[0]
    ry = pose.position[1] - frame.origin[1]
    x = rx * frame.outward_normal[0] + ry * frame.outward_normal[1]
    return LineLocalState(x=x, theta=pose.heading - frame.normal_angle)


def tangential_offset(point: Vec2, frame: EdgeFrame) -> float:
    """Coordinate of a world point along the frame's tangent."""
    rx = point[0] - frame.origin[0]
    ry = point[1] - frame.origin[1]
    return rx * frame.tangent[0] + ry * frame.tangent[1]


def from_edge_frame(frame: EdgeFrame, x: float, y: float) -> Vec2:
    """Map local (x, y) back to world coordinates."""
    _require_finite(x, y, what="local coordinate")
    nx, ny = frame.outward_normal
    tx, ty = frame.tangent
    return (
        frame.origin[0] + x * nx + y * tx,
        frame.origin[1] + x * ny + y * ty,
    )


def exit_point(frame: EdgeFrame, pose: GlobalPose, y_f: float) -> Vec2:
    """World point where a line solution with exit offset y_f meets the line."""
    return from_edge_frame(frame, 0.0, y_f + tangential_offset(pose.position, frame))


def world_heading(frame: EdgeFrame, theta: float) -> float:
    """Convert a heading measured from the outward normal to a world heading."""
    return wrap_angle(theta + frame.normal_angle)


def contains(polygon: ConvexPolygon, point: Vec2) -> Containment:
    """
    Classify a point against the closed polygon.

    A point is on the boundary when its largest signed edge offset is
    within eps_geom of zero.
    """
    eps = polygon.eps_geom
    rel = np.asarray(point, dtype=float) - np.asarray(polygon.vertices, dtype=float)
    worst = float((rel * polygon.outward_normals).sum(axis=1).max())

    if worst > eps:
        return Containment.EXTERIOR
    if worst >= -eps:
        return Containment.BOUNDARY
    return Containment.INTERIOR
