#!/usr/bin/env python3
"""
Line Escape Module

Closed-form minimum-time escape of a Dubins vehicle from the half-plane
x <= 0 across the line x = 0.

The state space splits into five regions:
- UP:   already on the line heading outward, escape time 0
- UL:   heading straight along the outward normal, run straight out
- DL:   heading straight inward, two mirror-image optimal turns exist
- R_T:  close enough to the line that a hard turn alone reaches it
- R_TS: hard turn to the normal, then straight

Optimal controls take only the values -1 (right), 0 (straight) and +1
(left). Every turning solution turns toward the outward normal, so the
first control is always -sign(theta).
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from loguru import logger

# Handle both package and standalone execution
try:
    from .escape_geometry import (
        DEFAULT_EPS_GEOM,
        EscapeError,
        InvalidArgumentError,
        LineLocalState,
        VehicleParams,
    )
except ImportError:
    from escape_geometry import (
        DEFAULT_EPS_GEOM,
        EscapeError,
        InvalidArgumentError,
        LineLocalState,
        VehicleParams,
    )


# Heading within this of 0 takes the straight-only branch (rad)
DEFAULT_STRAIGHT_TOL = 1e-9
# Heading within this of pi emits both mirror solutions (rad)
DEFAULT_DISPERSAL_TOL = 1e-9
# asin arguments this far outside [0, 1] are treated as roundoff
ASIN_CLAMP = 1e-12

HALF_PI = 0.5 * math.pi


class OutsideHalfPlaneError(EscapeError):
    """Raised when the start state lies strictly outside x <= 0."""

    code = "outside-half-plane"


class RegionViolationError(EscapeError):
    """Raised when a region formula is evaluated outside its region."""

    code = "region-violation"


class Region(str, Enum):
    """State-space partition for the line escape problem."""

    UP = "UP"
    UL = "UL"
    DL = "DL"
    R_T = "R_T"
    R_TS = "R_TS"


class StrategyKind(str, Enum):
    STRAIGHT_ONLY = "straight-only"
    TURN_ONLY = "turn-only"
    TURN_STRAIGHT = "turn-straight"


@dataclass(frozen=True)
class Strategy:
    """Strategy tag; turning strategies carry a direction of -1 or +1."""

    kind: StrategyKind
    direction: Optional[int] = None

    def __post_init__(self):
        if self.kind is StrategyKind.STRAIGHT_ONLY:
            if self.direction is not None:
                raise InvalidArgumentError("straight-only strategy has no direction")
        elif self.direction not in (-1, 1):
            raise InvalidArgumentError(
                f"turn direction must be -1 or +1, got {self.direction}"
            )

    def mirrored(self) -> "Strategy":
        if self.direction is None:
            return self
        return Strategy(self.kind, -self.direction)

    def __str__(self) -> str:
        if self.direction is None:
            return self.kind.value
        return f"{self.kind.value}({self.direction:+d})"


@dataclass(frozen=True)
class ControlPhase:
    """Constant control u held for duration (time units)."""

    u: int
    duration: float

    def __post_init__(self):
        if self.u not in (-1, 0, 1):
            raise InvalidArgumentError(f"control must be -1, 0 or +1, got {self.u}")
        if not math.isfinite(self.duration) or self.duration < 0:
            raise InvalidArgumentError(
                f"phase duration must be finite and >= 0, got {self.duration}"
            )
        object.__setattr__(self, "u", int(self.u))
        object.__setattr__(self, "duration", float(self.duration))


@dataclass(frozen=True)
class ControlSchedule:
    """
    Ordered control phases.

    At most two phases; with two, the first is a hard turn and the second
    is straight (bang then zero).
    """

    phases: tuple[ControlPhase, ...] = ()

    def __post_init__(self):
        phases = tuple(self.phases)
        if len(phases) > 2:
            raise InvalidArgumentError(f"schedule has {len(phases)} phases, at most 2 allowed")
        if len(phases) == 2 and (phases[0].u == 0 or phases[1].u != 0):
            raise InvalidArgumentError("two-phase schedule must be a hard turn followed by straight")
        object.__setattr__(self, "phases", phases)

    @property
    def total_duration(self) -> float:
        return math.fsum(phase.duration for phase in self.phases)

    def __iter__(self):
        return iter(self.phases)

    def __len__(self) -> int:
        return len(self.phases)

    def mirrored(self) -> "ControlSchedule":
        """Same schedule with every turn reversed."""
        return ControlSchedule(tuple(ControlPhase(-p.u, p.duration) for p in self.phases))


@dataclass(frozen=True)
class LineEscapeSolution:
    """
    One candidate minimum-time escape.

    ``y_f`` is the exit offset along the line tangent (normal rotated +90
    degrees), measured from the foot of the vehicle's normal projection.
    """

    strategy: Strategy
    t_f: float
    theta_f: float
    y_f: float
    schedule: ControlSchedule
    region: Region


@dataclass(frozen=True)
class LineEscapeResult:
    """Optimal solution, plus its mirror image on the dispersal line."""

    primary: LineEscapeSolution
    alternate: Optional[LineEscapeSolution] = None

    @property
    def solutions(self) -> tuple[LineEscapeSolution, ...]:
        if self.alternate is None:
            return (self.primary,)
        return (self.primary, self.alternate)


def _sign(theta: float) -> int:
    # theta = pi counts as positive
    return 1 if theta >= 0 else -1


def _check_state(state: LineLocalState, eps_geom: float) -> float:
    if state.x > eps_geom:
        raise OutsideHalfPlaneError(
            f"state x={state.x:.6g} lies outside the half-plane (eps={eps_geom:.3g})"
        )
    return min(state.x, 0.0)


def classify(
    state: LineLocalState,
    params: VehicleParams,
    *,
    eps_geom: float = DEFAULT_EPS_GEOM,
    straight_tol: float = DEFAULT_STRAIGHT_TOL,
    dispersal_tol: float = DEFAULT_DISPERSAL_TOL
) -> Region:
    """
    Locate a state in the region partition.

    Raises:
        OutsideHalfPlaneError: If state.x > eps_geom.
    """
    x = _check_state(state, eps_geom)
    abs_theta = abs(state.theta)
    on_line = state.x >= -eps_geom

    if on_line and abs_theta <= HALF_PI:
        return Region.UP
    if not on_line and abs_theta <= straight_tol:
        return Region.UL
    if not on_line and math.pi - abs_theta <= dispersal_tol:
        return Region.DL
    if x >= -params.min_turn_radius * math.sin(abs_theta):
        return Region.R_T
    return Region.R_TS


def _asin_argument(x: float, abs_theta: float, radius: float) -> float:
    arg = (radius * math.sin(abs_theta) + x) / radius
    if arg < -ASIN_CLAMP or arg > 1.0 + ASIN_CLAMP:
        raise RegionViolationError(
            f"asin argument {arg:.17g} outside [0, 1]; state (x={x}, |theta|={abs_theta}) is not turn-only"
        )
    return min(max(arg, 0.0), 1.0)


def _turn_only_heading(x: float, abs_theta: float, radius: float) -> float:
    abs_theta_f = math.asin(_asin_argument(x, abs_theta, radius))
    if abs_theta_f > abs_theta + ASIN_CLAMP:
        raise RegionViolationError(
            f"final heading {abs_theta_f} exceeds start heading {abs_theta}"
        )
    return min(abs_theta_f, abs_theta)


def final_heading(state: LineLocalState, params: VehicleParams) -> float:
    """
    Heading at which a turn-only escape meets the line.

    Returns:
        sign(theta) * asin((R sin|theta| + x) / R), with |result| <= |theta|.

    Raises:
        RegionViolationError: If the asin argument leaves [0, 1] beyond roundoff.
    """
    x = min(state.x, 0.0)
    abs_theta_f = _turn_only_heading(x, abs(state.theta), params.min_turn_radius)
    return _sign(state.theta) * abs_theta_f


def turn_only_time(state: LineLocalState, params: VehicleParams) -> float:
    """Escape time of a hard turn straight into the line: (R/v)(|theta| - |theta_f|)."""
    x = min(state.x, 0.0)
    abs_theta = abs(state.theta)
    abs_theta_f = _turn_only_heading(x, abs_theta, params.min_turn_radius)
    return params.min_turn_radius / params.speed * (abs_theta - abs_theta_f)


def turn_straight_time(state: LineLocalState, params: VehicleParams) -> float:
    """Escape time of a hard turn to the normal then a straight run."""
    x = min(state.x, 0.0)
    abs_theta = abs(state.theta)
    radius = params.min_turn_radius
    return (radius * abs_theta - x - radius * math.sin(abs_theta)) / params.speed


def _turn_only(x: float, abs_theta: float, sign: int, params: VehicleParams) -> LineEscapeSolution:
    radius = params.min_turn_radius
    arg = _asin_argument(x, abs_theta, radius)
    abs_theta_f = _turn_only_heading(x, abs_theta, radius)
    t_f = radius / params.speed * (abs_theta - abs_theta_f)
    y_f = sign * (radius * math.sqrt(max(0.0, 1.0 - arg * arg)) - radius * math.cos(abs_theta))
    return LineEscapeSolution(
        strategy=Strategy(StrategyKind.TURN_ONLY, -sign),
        t_f=t_f,
        theta_f=sign * abs_theta_f,
        y_f=y_f,
        schedule=ControlSchedule((ControlPhase(-sign, t_f),)),
        region=Region.R_T
    )


def _turn_straight(x: float, abs_theta: float, sign: int, params: VehicleParams) -> LineEscapeSolution:
    radius = params.min_turn_radius
    speed = params.speed
    reach = radius * math.sin(abs_theta)
    t_f = (radius * abs_theta - x - reach) / speed
    turn = abs_theta * radius / speed
    run = (-x - reach) / speed
    if run < 0:
        raise RegionViolationError(
            f"state (x={x}, |theta|={abs_theta}) reaches the line while turning"
        )
    return LineEscapeSolution(
        strategy=Strategy(StrategyKind.TURN_STRAIGHT, -sign),
        t_f=t_f,
        theta_f=0.0,
        y_f=sign * radius * (1.0 - math.cos(abs_theta)),
        schedule=ControlSchedule((ControlPhase(-sign, turn), ControlPhase(0, run))),
        region=Region.R_TS
    )


def _solve_turning(x: float, abs_theta: float, sign: int, params: VehicleParams) -> LineEscapeSolution:
    if x >= -params.min_turn_radius * math.sin(abs_theta):
        return _turn_only(x, abs_theta, sign, params)
    return _turn_straight(x, abs_theta, sign, params)


def solve_line(
    state: LineLocalState,
    params: VehicleParams,
    *,
    eps_geom: float = DEFAULT_EPS_GEOM,
    straight_tol: float = DEFAULT_STRAIGHT_TOL,
    dispersal_tol: float = DEFAULT_DISPERSAL_TOL
) -> LineEscapeResult:
    """
    Minimum-time escape across x = 0 from a local state.

    States on the line heading outward (|theta| <= pi/2) escape in zero
    time. Near theta = pi both turn directions are optimal: the primary
    turns right (-1), the alternate is its mirror image.

    Args:
        state: Local state with x <= eps_geom.
        params: Vehicle speed and minimum turn radius.
        eps_geom: Tolerance for "on the line".
        straight_tol: Heading tolerance of the straight-only branch.
        dispersal_tol: Heading tolerance of the dispersal line.

    Returns:
        LineEscapeResult with the optimal solution (and its mirror on the
        dispersal line).

    Raises:
        OutsideHalfPlaneError: If state.x > eps_geom.
    """
    region = classify(
        state, params,
        eps_geom=eps_geom, straight_tol=straight_tol, dispersal_tol=dispersal_tol
    )
    x = min(state.x, 0.0)
    theta = state.theta
    abs_theta = abs(theta)
    logger.trace(f"solve_line x={x!r} theta={theta!r} region={region.value}")

    if region is Region.UP:
        return LineEscapeResult(LineEscapeSolution(
            strategy=Strategy(StrategyKind.STRAIGHT_ONLY),
            t_f=0.0,
            theta_f=theta,
            y_f=0.0,
            schedule=ControlSchedule(),
            region=Region.UP
        ))

    if region is Region.UL:
        t_f = -x / params.speed
        return LineEscapeResult(LineEscapeSolution(
            strategy=Strategy(StrategyKind.STRAIGHT_ONLY),
            t_f=t_f,
            theta_f=theta,
            y_f=-x * math.tan(theta),
            schedule=ControlSchedule((ControlPhase(0, t_f),)),
            region=Region.UL
        ))

    if math.pi - abs_theta <= dispersal_tol:
        primary = _solve_turning(x, abs_theta, 1, params)
        alternate = _solve_turning(x, abs_theta, -1, params)
        logger.trace(f"dispersal state, t_f={primary.t_f!r} both directions")
        return LineEscapeResult(primary, alternate)

    return LineEscapeResult(_solve_turning(x, abs_theta, _sign(theta), params))


def escape_time_field(
    x: np.ndarray,
    theta: np.ndarray,
    params: VehicleParams,
    *,
    eps_geom: float = DEFAULT_EPS_GEOM
) -> np.ndarray:
    """
    Vectorized minimum escape time V(x, theta).

    Broadcasts x against theta and evaluates the same closed forms as
    solve_line without building solution objects. Positive x is clamped
    to the line.
    """
    x = np.minimum(np.asarray(x, dtype=float), 0.0)
    theta = np.asarray(theta, dtype=float)
    x, theta = np.broadcast_arrays(x, theta)

    # |wrap(theta)| in [0, pi]
    abs_theta = np.abs(np.remainder(theta + np.pi, 2.0 * np.pi) - np.pi)
    radius = params.min_turn_radius
    speed = params.speed
    reach = radius * np.sin(abs_theta)

    arg = np.clip((reach + x) / radius, 0.0, 1.0)
    turn_only = radius / speed * (abs_theta - np.minimum(np.arcsin(arg), abs_theta))
    turn_straight = (radius * abs_theta - x - reach) / speed

    values = np.where(x >= -reach, turn_only, turn_straight)
    values = np.where((x >= -eps_geom) & (abs_theta <= HALF_PI), 0.0, values)
    return values
