#!/usr/bin/env python3
"""
Polygon Escape Module

Minimum-time escape from a convex polygon. Leaving a convex polygon means
crossing at least one edge's supporting line, so the escape time is the
minimum over the per-edge line solutions.

Ties (several edges, or both mirror solutions of one edge, within the tie
tolerance of the optimum) are reported alongside the winner.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from loguru import logger

# Handle both package and standalone execution
try:
    from .escape_geometry import (
        Containment,
        ConvexPolygon,
        EdgeFrame,
        EscapeError,
        GlobalPose,
        LineLocalState,
        Vec2,
        VehicleParams,
        contains,
        edge_frame,
        from_edge_frame,
        tangential_offset,
        to_edge_frame,
        world_heading,
    )
    from .line_escape import (
        DEFAULT_DISPERSAL_TOL,
        DEFAULT_STRAIGHT_TOL,
        ControlSchedule,
        LineEscapeSolution,
        solve_line,
    )
    from .trajectory import NoCrossingError, line_crossing, propagate
except ImportError:
    from escape_geometry import (
        Containment,
        ConvexPolygon,
        EdgeFrame,
        EscapeError,
        GlobalPose,
        LineLocalState,
        Vec2,
        VehicleParams,
        contains,
        edge_frame,
        from_edge_frame,
        tangential_offset,
        to_edge_frame,
        world_heading,
    )
    from line_escape import (
        DEFAULT_DISPERSAL_TOL,
        DEFAULT_STRAIGHT_TOL,
        ControlSchedule,
        LineEscapeSolution,
        solve_line,
    )
    from trajectory import NoCrossingError, line_crossing, propagate


DEFAULT_TIE_TOL_REL = 1e-9
CERTIFICATE_SAMPLES = 256
# Normal velocity at exit must exceed this fraction of the speed
OUTWARD_TOL_REL = 1e-9


class VehicleOutsidePolygonError(EscapeError):
    """Raised when the start pose lies strictly outside the polygon."""

    code = "outside-polygon"


@dataclass(frozen=True)
class EdgeReport:
    """Line solution for one edge, mapped back to world coordinates."""

    edge_index: int
    local_state: LineLocalState
    solution: LineEscapeSolution
    exit_point_world: Vec2
    exit_heading_world: float
    exit_on_segment: bool
    is_alternate: bool = False

    @property
    def t_f(self) -> float:
        return self.solution.t_f


@dataclass(frozen=True)
class PolygonEscapeSolution:
    """
    Optimal escape over all edges.

    ``per_edge`` holds one primary report per edge in edge order;
    ``candidates`` adds the mirror alternates of dispersal-line edges.
    """

    best: EdgeReport
    t_f: float
    schedule: ControlSchedule
    ties: tuple[EdgeReport, ...]
    per_edge: tuple[EdgeReport, ...]
    candidates: tuple[EdgeReport, ...] = field(default=())


def _edge_report(
    polygon: ConvexPolygon,
    index: int,
    frame: EdgeFrame,
    local: LineLocalState,
    solution: LineEscapeSolution,
    offset: float,
    is_alternate: bool
) -> EdgeReport:
    along = solution.y_f + offset
    start, end = polygon.edges[index]
    length = math.hypot(end[0] - start[0], end[1] - start[1])
    eps = polygon.eps_geom
    return EdgeReport(
        edge_index=index,
        local_state=local,
        solution=solution,
        exit_point_world=from_edge_frame(frame, 0.0, along),
        exit_heading_world=world_heading(frame, solution.theta_f),
        exit_on_segment=-eps <= along <= length + eps,
        is_alternate=is_alternate
    )


def solve_polygon(
    pose: GlobalPose,
    params: VehicleParams,
    polygon: ConvexPolygon,
    tie_tol: Optional[float] = None,
    *,
    tie_tol_rel: float = DEFAULT_TIE_TOL_REL,
    straight_tol: float = DEFAULT_STRAIGHT_TOL,
    dispersal_tol: float = DEFAULT_DISPERSAL_TOL
) -> PolygonEscapeSolution:
    """
    Minimum-time escape from a convex polygon.

    Args:
        pose: World pose, inside or on the polygon.
        params: Vehicle parameters.
        polygon: Validated convex polygon.
        tie_tol: Absolute tie tolerance; defaults to tie_tol_rel * max(1, t_f).

    Returns:
        PolygonEscapeSolution. ``best`` is the lowest-index edge among those
        with the minimum escape time.

    Raises:
        VehicleOutsidePolygonError: If the pose is strictly outside.
    """
    if contains(polygon, pose.position) is Containment.EXTERIOR:
        raise VehicleOutsidePolygonError(
            f"vehicle at {pose.position} is outside the polygon"
        )

    eps = polygon.eps_geom
    per_edge = []
    candidates = []
    for index in range(polygon.edge_count):
        frame = edge_frame(polygon, index)
        local = to_edge_frame(pose, frame)
        result = solve_line(
            local, params,
            eps_geom=eps, straight_tol=straight_tol, dispersal_tol=dispersal_tol
        )
        offset = tangential_offset(pose.position, frame)
        reports = [
            _edge_report(polygon, index, frame, local, solution, offset, n > 0)
            for n, solution in enumerate(result.solutions)
        ]
        per_edge.append(reports[0])
        candidates.extend(reports)

    best = min(per_edge, key=lambda report: report.t_f)
    t_f = best.t_f
    if tie_tol is None:
        tie_tol = tie_tol_rel * max(1.0, t_f)
    ties = tuple(report for report in candidates if report.t_f - t_f <= tie_tol)

    logger.debug(
        f"best edge {best.edge_index} ({best.solution.region.value}) t_f={t_f!r}"
    )
    if len(ties) > 1:
        logger.debug(
            f"{len(ties)} tied candidates on edges {[r.edge_index for r in ties]}"
        )

    return PolygonEscapeSolution(
        best=best,
        t_f=t_f,
        schedule=best.solution.schedule,
        ties=ties,
        per_edge=tuple(per_edge),
        candidates=tuple(candidates)
    )


class CertificateReport(NamedTuple):
    passed: bool
    first_violation: Optional[str]
    checks: dict[str, bool]
    endpoint: Vec2


def escape_certificate(
    sol: PolygonEscapeSolution,
    pose: GlobalPose,
    params: VehicleParams,
    polygon: ConvexPolygon,
    *,
    samples: int = CERTIFICATE_SAMPLES
) -> CertificateReport:
    """
    Independently verify a polygon escape by propagating its schedule.

    Checks, in order:
    - contained: no supporting line is crossed before t_f (exact per-edge
      crossing times plus a sampled containment sweep)
    - on-boundary: the endpoint lies on the polygon boundary
    - outward: the final velocity points out of the winning edge, by more
      than OUTWARD_TOL_REL of the speed (a tangent exit fails)
    - exit-match: the endpoint is the reported exit point, on the winning
      edge's supporting line

    Never raises for a failed check; the report carries the first failure.
    """
    eps_geom = polygon.eps_geom
    t_f = sol.t_f
    eps_time = 1e-9 * max(1.0, t_f)
    checks = {"contained": True, "on-boundary": True, "outward": True, "exit-match": True}
    violations = []

    for index in range(polygon.edge_count):
        frame = edge_frame(polygon, index)
        local = to_edge_frame(pose, frame)
        if local.x > eps_geom:
            local = LineLocalState(0.0, local.theta)
        try:
            crossing = line_crossing(local, params, sol.schedule, eps_geom=eps_geom)
        except NoCrossingError:
            continue
        if crossing.t < t_f - eps_time:
            checks["contained"] = False
            violations.append(f"contained: crosses edge {index} line at t={crossing.t!r} < t_f={t_f!r}")
            break

    dt = t_f / samples if t_f > 0 else 1.0
    path = propagate(pose, params, sol.schedule, dt)
    if checks["contained"]:
        for sample in path:
            if sample.t >= t_f - eps_time:
                break
            if contains(polygon, sample.position) is Containment.EXTERIOR:
                checks["contained"] = False
                violations.append(f"contained: outside polygon at t={sample.t!r}")
                break

    end = path[-1]
    endpoint = end.position
    if contains(polygon, endpoint) is not Containment.BOUNDARY:
        checks["on-boundary"] = False
        violations.append(f"on-boundary: endpoint {endpoint} not on the boundary")

    frame = edge_frame(polygon, sol.best.edge_index)
    nx, ny = frame.outward_normal
    outward = params.speed * (math.cos(end.heading) * nx + math.sin(end.heading) * ny)
    outward_tol = OUTWARD_TOL_REL * params.speed
    if not (outward > outward_tol or (t_f == 0 and outward >= -outward_tol)):
        checks["outward"] = False
        violations.append(f"outward: normal velocity {outward!r} at exit")

    rx = endpoint[0] - frame.origin[0]
    ry = endpoint[1] - frame.origin[1]
    line_offset = rx * nx + ry * ny
    reported = sol.best.exit_point_world
    mismatch = math.hypot(endpoint[0] - reported[0], endpoint[1] - reported[1])
    if mismatch > eps_geom or abs(line_offset) > eps_geom:
        checks["exit-match"] = False
        violations.append(f"exit-match: endpoint {endpoint} differs from reported exit {reported}")

    first = violations[0] if violations else None
    if first is not None:
        logger.debug(f"certificate failed: {first}")
    return CertificateReport(first is None, first, checks, endpoint)
