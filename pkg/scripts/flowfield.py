#!/usr/bin/env python3
"""
Flowfield Module

Samples the line-escape synthesis over a rectangle of (x, theta) states:
escape time, region and first control for every cell.

Cells are stored row-major, x outer and theta inner. A theta range that
covers a full turn is sampled half-open, (lo, hi], so that -pi and pi are
not both present.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np
from loguru import logger

# Handle both package and standalone execution
try:
    from .escape_geometry import InvalidArgumentError, LineLocalState, TWO_PI, VehicleParams
    from .line_escape import DEFAULT_DISPERSAL_TOL, DEFAULT_STRAIGHT_TOL, classify, solve_line
    from .trajectory import ValueGrid
except ImportError:
    from escape_geometry import InvalidArgumentError, LineLocalState, TWO_PI, VehicleParams
    from line_escape import DEFAULT_DISPERSAL_TOL, DEFAULT_STRAIGHT_TOL, classify, solve_line
    from trajectory import ValueGrid


FLOWFIELD_COLUMNS = ("x", "theta", "t_f", "region", "u0")


class FlowCell(NamedTuple):
    x: float
    theta: float
    t_f: float
    region: str
    u0: int


@dataclass(frozen=True)
class FlowfieldGrid:
    x_range: tuple[float, float]
    theta_range: tuple[float, float]
    nx: int
    ntheta: int
    x_values: np.ndarray
    theta_values: np.ndarray
    cells: tuple[FlowCell, ...]

    def cell(self, i: int, j: int) -> FlowCell:
        return self.cells[i * self.ntheta + j]

    def to_value_grid(self) -> ValueGrid:
        """Escape times as a ValueGrid for hjb_residual."""
        values = np.array([c.t_f for c in self.cells], dtype=float).reshape(self.nx, self.ntheta)
        return ValueGrid(self.x_values, self.theta_values, values)

    def to_dict(self) -> dict[str, Any]:
        return {
            "x_range": list(self.x_range),
            "theta_range": list(self.theta_range),
            "nx": self.nx,
            "ntheta": self.ntheta,
            "cells": [c._asdict() for c in self.cells],
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(FLOWFIELD_COLUMNS)
        writer.writerows(self.cells)
        return buffer.getvalue()


def theta_axis(lo: float, hi: float, n: int) -> np.ndarray:
    """Heading samples; a full-turn range drops its first endpoint."""
    if hi - lo >= TWO_PI - 1e-12:
        return np.linspace(lo, hi, n + 1)[1:]
    return np.linspace(lo, hi, n)


def build_flowfield(
    x_range: tuple[float, float],
    theta_range: tuple[float, float],
    nx: int,
    ntheta: int,
    params: VehicleParams,
    *,
    straight_tol: float = DEFAULT_STRAIGHT_TOL,
    dispersal_tol: float = DEFAULT_DISPERSAL_TOL
) -> FlowfieldGrid:
    """
    Solve every cell of an (x, theta) grid.

    Raises:
        InvalidArgumentError: If a range is empty or reversed, x leaves
            x <= 0, or a dimension is below 2.
    """
    x_lo, x_hi = (float(v) for v in x_range)
    t_lo, t_hi = (float(v) for v in theta_range)
    if nx < 2 or ntheta < 2:
        raise InvalidArgumentError(f"grid needs nx, ntheta >= 2, got {nx}x{ntheta}")
    if not all(math.isfinite(v) for v in (x_lo, x_hi, t_lo, t_hi)):
        raise InvalidArgumentError("ranges must be finite")
    if x_hi > 0:
        raise InvalidArgumentError(f"x range must satisfy x <= 0, got [{x_lo}, {x_hi}]")
    if x_lo >= x_hi or t_lo >= t_hi:
        raise InvalidArgumentError("ranges must be increasing")

    x_values = np.linspace(x_lo, x_hi, nx)
    theta_values = theta_axis(t_lo, t_hi, ntheta)
    tolerances = {"straight_tol": straight_tol, "dispersal_tol": dispersal_tol}

    cells = []
    for x in x_values:
        for theta in theta_values:
            state = LineLocalState(float(x), float(theta))
            solution = solve_line(state, params, **tolerances).primary
            phases = solution.schedule.phases
            cells.append(FlowCell(
                x=float(x),
                theta=float(theta),
                t_f=solution.t_f,
                region=classify(state, params, **tolerances).value,
                u0=phases[0].u if phases else 0
            ))

    logger.debug(f"flowfield {nx}x{ntheta} over x={x_range} theta={theta_range}")
    return FlowfieldGrid(
        x_range=(x_lo, x_hi),
        theta_range=(t_lo, t_hi),
        nx=nx,
        ntheta=ntheta,
        x_values=x_values,
        theta_values=theta_values,
        cells=tuple(cells)
    )
