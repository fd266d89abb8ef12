#!/usr/bin/env python3
"""
Trajectory Module

Exact propagation of bang/straight control schedules, analytic line
crossings, a brute-force minimum-time oracle and value-function checks.

Propagation never steps an ODE: every phase is either a circular arc of
radius R (u = +1 left, u = -1 right) or a straight segment, composed in
closed form. For heading h0 and control u, the arc position after time t is

    p(t) = p0 + R u (sin h - sin h0, cos h0 - cos h),  h = h0 + u (v/R) t

which is also valid for negative t (retrograde time).
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.optimize import minimize_scalar

# Handle both package and standalone execution
try:
    from .escape_geometry import (
        DEFAULT_EPS_GEOM,
        EscapeError,
        GlobalPose,
        InvalidArgumentError,
        LineLocalState,
        Vec2,
        VehicleParams,
        wrap_angle,
    )
    from .line_escape import ASIN_CLAMP, ControlPhase, ControlSchedule, Region, solve_line
except ImportError:
    from escape_geometry import (
        DEFAULT_EPS_GEOM,
        EscapeError,
        GlobalPose,
        InvalidArgumentError,
        LineLocalState,
        Vec2,
        VehicleParams,
        wrap_angle,
    )
    from line_escape import ASIN_CLAMP, ControlPhase, ControlSchedule, Region, solve_line


DEFAULT_ORACLE_GRID_N = 4096
MIN_ORACLE_GRID_N = 100
DEFAULT_REFINE_TOL = 1e-10
DEFAULT_SAMPLES_PER_ESCAPE = 256

# HJB check defaults
DEFAULT_MAX_SPACING = 0.05
DEFAULT_SINGULAR_MARGIN = 0.05
DEFAULT_BAND_FACTOR = 2.0
DEFAULT_HJB_THRESHOLD = 1e-4

# Arc roots with cos(heading) below this point inward and are not crossings
_OUTWARD_TOL = 1e-9
# Relative time slack when matching a root to its phase
_PHASE_SLACK = 1e-9
# Sample times closer than this (relative) collapse into one
_SAMPLE_DEDUPE = 1e-12
_INFEASIBLE = 1e30


class NoCrossingError(EscapeError):
    """Raised when a schedule ends without reaching the line."""

    code = "no-crossing"


class InvalidGridError(EscapeError):
    """Raised when a value grid is too coarse or leaves nothing to check."""

    code = "invalid-grid"


class PathSample(NamedTuple):
    t: float
    position: Vec2
    heading: float
    u: int


class LineCrossing(NamedTuple):
    t: float
    y: float
    heading: float


class OracleResult(NamedTuple):
    """
    Brute-force minimum escape time.

    ``first_turn_sign`` is 0 for the pure-straight candidate. ``tolerance``
    bounds |t_best - t_true| from grid resolution and refinement.
    """

    t_best: float
    first_turn_sign: int
    turn_duration: float
    tolerance: float


Schedule = Union[ControlSchedule, Sequence[ControlPhase]]


def _advance(
    x: float,
    y: float,
    heading: float,
    u: int,
    dt: float,
    params: VehicleParams
) -> tuple[float, float, float]:
    """Exact state after holding control u for dt (dt < 0 runs backward)."""
    if u == 0:
        dist = params.speed * dt
        return x + dist * math.cos(heading), y + dist * math.sin(heading), heading

    radius = params.min_turn_radius
    h1 = heading + u * params.turn_rate * dt
    return (
        x + radius * u * (math.sin(h1) - math.sin(heading)),
        y + radius * u * (math.cos(heading) - math.cos(h1)),
        h1,
    )


def _start_state(start: Union[LineLocalState, GlobalPose]) -> tuple[float, float, float]:
    if isinstance(start, GlobalPose):
        return start.position[0], start.position[1], start.heading
    if isinstance(start, LineLocalState):
        return start.x, 0.0, start.theta
    raise InvalidArgumentError(f"unsupported start type {type(start).__name__}")


def default_sample_dt(t_f: float, samples: int = DEFAULT_SAMPLES_PER_ESCAPE) -> float:
    """Trace sample spacing t_f / samples; 1.0 for a zero-time escape."""
    if t_f <= 0:
        return 1.0
    return t_f / samples


def propagate(
    start: Union[LineLocalState, GlobalPose],
    params: VehicleParams,
    schedule: Schedule,
    sample_dt: float
) -> list[PathSample]:
    """
    Sample the exact path of a schedule.

    Samples fall on multiples of sample_dt plus every phase endpoint. A
    LineLocalState starts at local position (x, 0); a GlobalPose at its
    world position.

    Each sample's ``u`` is the control in effect from that instant on; the
    final sample repeats the last phase's control.

    Raises:
        InvalidArgumentError: If sample_dt is not a positive finite number.
    """
    if not math.isfinite(sample_dt) or sample_dt <= 0:
        raise InvalidArgumentError(f"sample_dt must be positive, got {sample_dt}")

    x, y, heading = _start_state(start)
    phases = [phase for phase in schedule if phase.duration > 0]
    if not phases:
        return [PathSample(0.0, (x, y), wrap_angle(heading), 0)]

    samples = [PathSample(0.0, (x, y), wrap_angle(heading), phases[0].u)]
    t0 = 0.0
    for index, phase in enumerate(phases):
        t1 = t0 + phase.duration
        k = math.floor(t0 / sample_dt) + 1
        while True:
            t = k * sample_dt
            if t >= t1 - _SAMPLE_DEDUPE * max(1.0, t1):
                break
            if t > t0 + _SAMPLE_DEDUPE * max(1.0, t0):
                px, py, h = _advance(x, y, heading, phase.u, t - t0, params)
                samples.append(PathSample(t, (px, py), wrap_angle(h), phase.u))
            k += 1

        x, y, heading = _advance(x, y, heading, phase.u, phase.duration, params)
        next_u = phases[index + 1].u if index + 1 < len(phases) else phase.u
        samples.append(PathSample(t1, (x, y), wrap_angle(heading), next_u))
        t0 = t1

    return samples


def propagate_retrograde(end: GlobalPose, params: VehicleParams, schedule: Schedule) -> GlobalPose:
    """
    Run a schedule backward in time from its terminal pose.

    Phases are undone last to first; the result is the pose the schedule
    started from.
    """
    x, y, heading = _start_state(end)
    for phase in reversed(tuple(schedule)):
        x, y, heading = _advance(x, y, heading, phase.u, -phase.duration, params)
    return GlobalPose((x, y), heading)


def _arc_crossing_time(x0: float, heading: float, u: int, params: VehicleParams) -> Optional[float]:
    """Time until an arc first meets x = 0 moving outward (or tangent), if ever."""
    radius = params.min_turn_radius
    s = (radius * math.sin(heading) - u * x0) / radius
    if abs(s) > 1.0 + ASIN_CLAMP:
        return None
    a = math.asin(min(max(s, -1.0), 1.0))

    best = None
    for root in (a, math.pi - a):
        if math.cos(root) < -_OUTWARD_TOL:
            continue
        turned = (u * (root - heading)) % (2.0 * math.pi)
        if best is None or turned < best:
            best = turned
    if best is None:
        return None
    return best / params.turn_rate


def line_crossing(
    start: LineLocalState,
    params: VehicleParams,
    schedule: Schedule,
    *,
    eps_geom: float = DEFAULT_EPS_GEOM
) -> LineCrossing:
    """
    First crossing of x = 0 by a schedule started from a local state.

    Each phase is solved analytically: an arc against the line, or a
    linear solve for a straight segment. A start already on the line and
    heading outward crosses at t = 0.

    Returns:
        LineCrossing(t, y, heading) with y measured from the start's
        normal projection and heading wrapped.

    Raises:
        NoCrossingError: If the schedule ends before reaching the line.
    """
    x, y, heading = start.x, 0.0, start.theta
    if x >= -eps_geom and math.cos(heading) >= 0:
        return LineCrossing(0.0, 0.0, wrap_angle(heading))

    t0 = 0.0
    for phase in schedule:
        duration = phase.duration
        slack = _PHASE_SLACK * max(1.0, duration)

        if phase.u == 0:
            c = math.cos(heading)
            tc = -x / (params.speed * c) if c > 0 else None
        else:
            tc = _arc_crossing_time(x, heading, phase.u, params)

        if tc is not None and tc <= duration + slack:
            tc = max(tc, 0.0)
            _, yc, hc = _advance(x, y, heading, phase.u, tc, params)
            return LineCrossing(t0 + tc, yc, wrap_angle(hc))

        x, y, heading = _advance(x, y, heading, phase.u, duration, params)
        t0 += duration

    raise NoCrossingError(
        f"schedule ends at x={x:.6g} after t={t0:.6g} without reaching the line"
    )


def oracle_min_time(
    state: LineLocalState,
    params: VehicleParams,
    grid_n: int = DEFAULT_ORACLE_GRID_N,
    *,
    refine_tol: float = DEFAULT_REFINE_TOL
) -> OracleResult:
    """
    Brute-force minimum escape time over turn-then-straight paths.

    Searches pure straight, pure turn (either direction) and every turn
    duration on a grid over one full revolution followed by a straight run,
    then refines the best grid candidate with a bounded scalar search.
    Works only from the dynamics; no closed-form escape formulas are used.

    Raises:
        InvalidArgumentError: If grid_n < 100.
    """
    if grid_n < MIN_ORACLE_GRID_N:
        raise InvalidArgumentError(f"grid_n must be >= {MIN_ORACLE_GRID_N}, got {grid_n}")

    x = min(state.x, 0.0)
    theta = state.theta
    radius = params.min_turn_radius
    speed = params.speed
    rate = params.turn_rate

    best_t, best_sign, best_tau = math.inf, 0, 0.0
    if math.cos(theta) > 0:
        best_t = -x / (speed * math.cos(theta))

    for sign in (-1, 1):
        tc = _arc_crossing_time(x, theta, sign, params)
        if tc is not None and tc < best_t:
            best_t, best_sign, best_tau = tc, sign, tc

    taus = np.linspace(0.0, 2.0 * math.pi / rate, grid_n)
    spacing = float(taus[1] - taus[0])

    def run_time(tau: float, sign: int) -> float:
        h = theta + sign * rate * tau
        xe = x + radius * sign * (math.sin(h) - math.sin(theta))
        c = math.cos(h)
        if xe > 0 or c <= 0:
            return _INFEASIBLE
        return tau + (-xe) / (speed * c)

    grid_best = (math.inf, 0, 0)
    for sign in (-1, 1):
        h = theta + sign * rate * taus
        xe = x + radius * sign * (np.sin(h) - math.sin(theta))
        c = np.cos(h)
        feasible = (xe <= 0) & (c > 0)
        if not feasible.any():
            continue
        totals = np.full(grid_n, np.inf)
        totals[feasible] = taus[feasible] + (-xe[feasible]) / (speed * c[feasible])
        i = int(np.argmin(totals))
        if totals[i] < grid_best[0]:
            grid_best = (float(totals[i]), sign, i)

    t_grid, sign, i = grid_best
    if math.isfinite(t_grid):
        lo = float(taus[max(i - 1, 0)])
        hi = float(taus[min(i + 1, grid_n - 1)])
        refined = minimize_scalar(
            run_time,
            bounds=(lo, hi),
            args=(sign,),
            method="bounded",
            options={"xatol": refine_tol}
        )
        tau, t_refined = float(refined.x), float(refined.fun)
        if t_refined > t_grid:
            tau, t_refined = float(taus[i]), t_grid
        logger.trace(f"oracle refine sign={sign:+d} bracket=[{lo!r}, {hi!r}] tau={tau!r}")
        if t_refined < best_t:
            best_t, best_sign, best_tau = t_refined, sign, tau

    tolerance = max(refine_tol, speed * spacing ** 2 / (2.0 * radius))
    return OracleResult(best_t, best_sign, best_tau, tolerance)


def costates(state: LineLocalState, params: VehicleParams) -> tuple[float, float]:
    """
    Gradient (lambda_x, lambda_theta) of the value function at a state.

    Along an optimal path the turning control satisfies
    u = -sign(lambda_theta).
    """
    solution = solve_line(state, params).primary
    speed = params.speed
    radius = params.min_turn_radius
    sign = 1.0 if state.theta >= 0 else -1.0

    if solution.region is Region.R_T:
        cos_f = math.cos(solution.theta_f)
        return (
            -1.0 / (speed * cos_f),
            sign * radius / speed * (1.0 - math.cos(state.theta) / cos_f),
        )
    if solution.region is Region.R_TS:
        return -1.0 / speed, sign * radius / speed * (1.0 - math.cos(state.theta))
    if solution.region is Region.UL:
        return -1.0 / speed, 0.0
    return -1.0 / (speed * math.cos(state.theta)), 0.0


@dataclass(frozen=True)
class ValueGrid:
    """Escape times on a rectilinear (x, theta) grid, values[i, j] at (x_i, theta_j)."""

    x_values: np.ndarray
    theta_values: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x_values = np.asarray(self.x_values, dtype=float)
        theta_values = np.asarray(self.theta_values, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (x_values.size, theta_values.size):
            raise InvalidGridError(
                f"values shape {values.shape} does not match axes "
                f"({x_values.size}, {theta_values.size})"
            )
        for name, axis in (("x", x_values), ("theta", theta_values)):
            if axis.size < 2 or np.any(np.diff(axis) <= 0):
                raise InvalidGridError(f"{name} axis must be strictly increasing with >= 2 points")
        object.__setattr__(self, "x_values", x_values)
        object.__setattr__(self, "theta_values", theta_values)
        object.__setattr__(self, "values", values)


class HJBReport(NamedTuple):
    max_residual: float
    location: tuple[float, float]
    points_checked: int
    costate_sign_ok: bool
    costate_violation: Optional[tuple[float, float]]
    threshold: float
    passed: bool


def hjb_residual(
    grid: ValueGrid,
    params: VehicleParams,
    *,
    max_spacing: float = DEFAULT_MAX_SPACING,
    singular_margin: float = DEFAULT_SINGULAR_MARGIN,
    band_factor: float = DEFAULT_BAND_FACTOR,
    threshold: float = DEFAULT_HJB_THRESHOLD
) -> HJBReport:
    """
    Check the HJB equation on a grid of escape times.

    Gradients come from central differences at interior grid points. Points
    within singular_margin of theta = 0 or |theta| = pi, and within
    band_factor grid steps of the turn-only boundary x = -R sin|theta|,
    are skipped because the value function is not smooth there.

    The residual is |1 + V_x v cos(theta) - |V_theta| v / R|; the report
    also flags any checked point with V_x >= 0.

    Raises:
        InvalidGridError: If spacing exceeds max_spacing or no point survives
            the exclusions.
    """
    x_axis, theta_axis = grid.x_values, grid.theta_values
    hx = float(np.max(np.diff(x_axis)))
    htheta = float(np.max(np.diff(theta_axis)))
    if max(hx, htheta) > max_spacing:
        raise InvalidGridError(
            f"grid spacing ({hx:.3g}, {htheta:.3g}) exceeds max_spacing {max_spacing}"
        )
    if x_axis.size < 3 or theta_axis.size < 3:
        raise InvalidGridError("central differences need at least 3 points per axis")

    radius = params.min_turn_radius
    speed = params.speed
    values = grid.values

    xs = x_axis[1:-1, None]
    thetas = theta_axis[None, 1:-1]
    dx = (x_axis[2:] - x_axis[:-2])[:, None]
    dtheta = (theta_axis[2:] - theta_axis[:-2])[None, :]
    v_x = (values[2:, 1:-1] - values[:-2, 1:-1]) / dx
    v_theta = (values[1:-1, 2:] - values[1:-1, :-2]) / dtheta

    abs_theta = np.abs(thetas)
    band = band_factor * max(hx, radius * htheta)
    mask = (
        (abs_theta >= singular_margin)
        & (math.pi - abs_theta >= singular_margin)
        & (np.abs(xs + radius * np.sin(abs_theta)) >= band)
    )
    mask = np.broadcast_to(mask, v_x.shape)
    points = int(np.count_nonzero(mask))
    if points == 0:
        raise InvalidGridError("no grid point left after singular-line and boundary exclusions")

    residual = np.abs(1.0 + v_x * speed * np.cos(thetas) - np.abs(v_theta) * speed / radius)
    residual = np.where(mask, residual, -np.inf)
    i, j = np.unravel_index(int(np.argmax(residual)), residual.shape)
    max_residual = float(residual[i, j])
    location = (float(x_axis[i + 1]), float(theta_axis[j + 1]))

    bad = mask & (v_x >= 0)
    costate_ok = not bool(bad.any())
    violation = None
    if not costate_ok:
        bi, bj = np.argwhere(bad)[0]
        violation = (float(x_axis[bi + 1]), float(theta_axis[bj + 1]))
        logger.debug(f"V_x >= 0 at x={violation[0]!r} theta={violation[1]!r}")

    passed = max_residual <= threshold and costate_ok
    logger.debug(
        f"HJB residual max={max_residual:.3e} at {location} over {points} points, passed={passed}"
    )
    return HJBReport(max_residual, location, points, costate_ok, violation, threshold, passed)
