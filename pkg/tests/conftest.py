"""
Pytest configuration for the Dubins escape test suite.

This file automatically adds the scripts directory to the Python path
so that test modules can import scripts without sys.path manipulation,
and provides the shared polygons and vehicles used across test modules.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial import ConvexHull

# Add scripts directory to path for imports
scripts_dir = Path(__file__).parent.parent / "scripts"
if str(scripts_dir) not in sys.path:
    sys.path.insert(0, str(scripts_dir))

from escape_geometry import GlobalPose, VehicleParams, validate_polygon  # noqa: E402


UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def regular_polygon(n: int, circumradius: float, center=(0.0, 0.0)):
    """Counter-clockwise regular n-gon vertices."""
    return [
        (
            center[0] + circumradius * math.cos(2.0 * math.pi * k / n),
            center[1] + circumradius * math.sin(2.0 * math.pi * k / n),
        )
        for k in range(n)
    ]


def random_convex_instance(rng):
    """Convex polygon on a rotated ellipse, an interior pose and a vehicle."""
    n = int(rng.integers(5, 13))
    while True:
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, n))
        gaps = np.diff(np.append(angles, angles[0] + 2.0 * math.pi))
        if gaps.min() > 0.05:
            break

    a, b = rng.uniform(0.5, 3.0, 2)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    center = rng.uniform(-5.0, 5.0, 2)
    local = np.column_stack((a * np.cos(angles), b * np.sin(angles)))
    rotation = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    points = local @ rotation.T + center

    hull = ConvexHull(points)
    assert len(hull.vertices) == n
    vertices = [tuple(p) for p in points[hull.vertices]]

    weights = rng.dirichlet(np.ones(n))
    position = tuple(weights @ np.asarray(vertices))
    pose = GlobalPose(position, float(rng.uniform(-math.pi, math.pi)))
    params = VehicleParams(float(rng.uniform(0.1, 10.0)), float(rng.uniform(0.05, 2.0)))
    return vertices, pose, params


@pytest.fixture
def unit_params():
    """Vehicle with v = R = 1."""
    return VehicleParams(speed=1.0, min_turn_radius=1.0)


@pytest.fixture
def unit_square():
    """Unit square; edges 0 bottom, 1 right, 2 top, 3 left."""
    return validate_polygon(UNIT_SQUARE)


@pytest.fixture
def hexagon():
    """Regular hexagon with circumradius 2 centered at the origin."""
    return validate_polygon(regular_polygon(6, 2.0))
