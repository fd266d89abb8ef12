"""
Tests for the escape command-line interface.

Tests every subcommand end to end: exit codes, error objects on stderr,
output formats and agreement with the library.
"""

import importlib
import io
import json
import math
import tempfile
from pathlib import Path

import numpy as np
import pytest

import escape_cli
import escape_io
from escape_geometry import to_edge_frame
from line_escape import solve_line
from plot_emit import OPTIMAL_CLASS, read_svg_paths
from polygon_escape import solve_polygon
from tests.conftest import UNIT_SQUARE, random_convex_instance


POLYGON_INSTANCE = {
    "vehicle": {"x": 0.5, "y": 0.5, "heading_rad": math.pi / 4.0, "speed": 1.0, "min_turn_radius": 0.1},
    "polygon": {"vertices": [list(v) for v in UNIT_SQUARE]},
}

LINE_INSTANCE = {
    "vehicle": {"x": -3.0, "y": 0.0, "heading_rad": math.pi, "speed": 1.0, "min_turn_radius": 1.0},
    "line": {"point": [0.0, 0.0], "outward_normal": [1.0, 0.0]},
}

STRAIGHT_LINE_INSTANCE = {
    "vehicle": {"x": 0.0, "y": 0.0, "heading_rad": 0.0, "speed": 1.0, "min_turn_radius": 1.0},
    "line": {"point": [3.0, 0.0], "outward_normal": [1.0, 0.0]},
}

QUARTER_LINE_INSTANCE = {
    "vehicle": {"x": 0.0, "y": 0.0, "heading_rad": math.pi / 2.0, "speed": 1.0, "min_turn_radius": 1.0},
    "line": {"point": [1.0, 0.0], "outward_normal": [1.0, 0.0]},
}

STRAIGHT_POLYGON_INSTANCE = {
    "vehicle": {"x": 0.5, "y": 0.5, "heading_rad": 0.0, "speed": 1.0, "min_turn_radius": 0.1},
    "polygon": {"vertices": [list(v) for v in UNIT_SQUARE]},
}

FIXTURES = [
    ("solve-line", LINE_INSTANCE),
    ("solve-line", STRAIGHT_LINE_INSTANCE),
    ("solve-line", QUARTER_LINE_INSTANCE),
    ("solve-polygon", POLYGON_INSTANCE),
    ("solve-polygon", STRAIGHT_POLYGON_INSTANCE),
]


@pytest.fixture
def instance_file():
    """Write a problem instance to a temporary file and return its path."""
    with tempfile.TemporaryDirectory() as tmpdir:
        def write(document, name="problem.json"):
            path = Path(tmpdir) / name
            path.write_text(json.dumps(document) if isinstance(document, dict) else document)
            return str(path)
        yield write


def _error(captured):
    return json.loads(captured.err.strip().splitlines()[-1])["error"]


class TestSolveCommands:
    """Tests for solve-line and solve-polygon."""

    def test_solve_polygon(self, instance_file, capsys):
        """Test a polygon solve against the library."""
        code = escape_cli.main(["solve-polygon", "--input", instance_file(POLYGON_INSTANCE)])
        document = json.loads(capsys.readouterr().out)

        instance = escape_io.parse_instance(json.dumps(POLYGON_INSTANCE))
        expected = solve_polygon(instance.pose, instance.params, instance.polygon)
        assert code == escape_cli.EXIT_OK
        assert document["escape_time"] == expected.t_f
        assert document["edge_index"] == 1
        assert len(document["ties"]) == 2

    def test_solve_polygon_certified(self, instance_file, capsys):
        """Test that --certify attaches a passing certificate."""
        code = escape_cli.main(["solve-polygon", "--certify", "--input", instance_file(POLYGON_INSTANCE)])
        document = json.loads(capsys.readouterr().out)

        assert code == escape_cli.EXIT_OK
        assert document["certificate"]["passed"] is True
        assert document["certificate"]["first_violation"] is None

    def test_solve_line(self, instance_file, capsys):
        """Test a head-on line escape."""
        code = escape_cli.main(["solve-line", "--input", instance_file(LINE_INSTANCE)])
        document = json.loads(capsys.readouterr().out)

        assert code == escape_cli.EXIT_OK
        assert document["mode"] == "line"
        assert document["escape_time"] == pytest.approx(3.0 + math.pi)
        assert len(document["ties"]) == 2

    @pytest.mark.parametrize("command,instance", FIXTURES)
    def test_output_is_deterministic(self, instance_file, capsys, command, instance):
        """Test that repeated runs print identical bytes."""
        path = instance_file(instance)

        escape_cli.main([command, "--input", path])
        first = capsys.readouterr().out
        escape_cli.main([command, "--input", path])
        second = capsys.readouterr().out

        assert first == second

    @pytest.mark.parametrize("instance,escape_time,exit_point", [
        (STRAIGHT_LINE_INSTANCE, 3.0, [3.0, 0.0]),
        (QUARTER_LINE_INSTANCE, math.pi / 2.0, [1.0, 1.0]),
    ])
    def test_line_world_frame(self, instance_file, capsys, instance, escape_time, exit_point):
        """Test line escapes that start off the origin of the line frame."""
        code = escape_cli.main(["solve-line", "--input", instance_file(instance)])
        document = json.loads(capsys.readouterr().out)

        assert code == escape_cli.EXIT_OK
        assert document["escape_time"] == pytest.approx(escape_time, rel=1e-12)
        assert document["exit_point"] == pytest.approx(exit_point, abs=1e-12)
        assert document["final_heading_rad"] == pytest.approx(0.0, abs=1e-12)

    def test_straight_polygon_escape(self, instance_file, capsys):
        """Test a straight run to the right edge of the unit square."""
        code = escape_cli.main(["solve-polygon", "--input", instance_file(STRAIGHT_POLYGON_INSTANCE)])
        document = json.loads(capsys.readouterr().out)

        assert code == escape_cli.EXIT_OK
        assert document["escape_time"] == pytest.approx(0.5)
        assert document["edge_index"] == 1
        assert document["exit_point"] == pytest.approx([1.0, 0.5])

    def test_polygon_matches_library(self, instance_file, capsys):
        """Test that solve-polygon prints the library document on random instances."""
        rng = np.random.default_rng(53)
        for _ in range(25):
            vertices, pose, params = random_convex_instance(rng)
            document = {
                "vehicle": {
                    "x": pose.position[0],
                    "y": pose.position[1],
                    "heading_rad": pose.heading,
                    "speed": params.speed,
                    "min_turn_radius": params.min_turn_radius,
                },
                "polygon": {"vertices": [[float(x), float(y)] for x, y in vertices]},
            }
            instance = escape_io.parse_instance(json.dumps(document))
            expected = escape_io.polygon_document(
                solve_polygon(instance.pose, instance.params, instance.polygon)
            )

            code = escape_cli.main(["solve-polygon", "--input", instance_file(document)])

            assert code == escape_cli.EXIT_OK
            assert capsys.readouterr().out == escape_io.dumps_document(expected)

    def test_line_matches_library(self, instance_file, capsys):
        """Test that solve-line prints the library document on random instances."""
        rng = np.random.default_rng(59)
        for _ in range(25):
            alpha = float(rng.uniform(-math.pi, math.pi))
            normal = [math.cos(alpha), math.sin(alpha)]
            point = [float(v) for v in rng.uniform(-5.0, 5.0, 2)]
            depth, along = float(rng.uniform(0.0, 5.0)), float(rng.uniform(-5.0, 5.0))
            document = {
                "vehicle": {
                    "x": point[0] - depth * normal[0] - along * normal[1],
                    "y": point[1] - depth * normal[1] + along * normal[0],
                    "heading_rad": float(rng.uniform(-math.pi, math.pi)),
                    "speed": float(rng.uniform(0.1, 10.0)),
                    "min_turn_radius": float(rng.uniform(0.1, 10.0)),
                },
                "line": {"point": point, "outward_normal": normal},
            }
            instance = escape_io.parse_instance(json.dumps(document))
            result = solve_line(to_edge_frame(instance.pose, instance.line), instance.params)
            expected = escape_io.line_document(result, instance.line, instance.pose)

            code = escape_cli.main(["solve-line", "--input", instance_file(document)])

            assert code == escape_cli.EXIT_OK
            assert capsys.readouterr().out == escape_io.dumps_document(expected)

    def test_oracle_cross_check(self, instance_file, capsys):
        """Test that --oracle attaches a passing oracle comparison."""
        code = escape_cli.main(["solve-line", "--oracle", "--input", instance_file(QUARTER_LINE_INSTANCE)])
        document = json.loads(capsys.readouterr().out)

        assert code == escape_cli.EXIT_OK
        assert document["oracle"]["passed"] is True
        assert document["oracle"]["t_best"] == pytest.approx(math.pi / 2.0, abs=document["oracle"]["tolerance"])
        assert document["oracle"]["difference"] <= document["oracle"]["tolerance"]

    def test_oracle_grid_from_environment(self, instance_file, capsys, monkeypatch):
        """Test that ESCAPE_ORACLE_GRID_N sets the oracle grid and its tolerance."""
        monkeypatch.setenv("ESCAPE_ORACLE_GRID_N", "100")

        code = escape_cli.main(["solve-line", "--oracle", "--input", instance_file(STRAIGHT_LINE_INSTANCE)])
        document = json.loads(capsys.readouterr().out)

        spacing = 2.0 * math.pi / 99
        assert code == escape_cli.EXIT_OK
        assert document["oracle"]["tolerance"] == pytest.approx(spacing ** 2 / 2.0)
        assert document["oracle"]["t_best"] == pytest.approx(3.0, abs=1e-12)

    def test_oracle_absent_by_default(self, instance_file, capsys):
        """Test that documents carry no oracle section without --oracle."""
        escape_cli.main(["solve-line", "--input", instance_file(LINE_INSTANCE)])
        assert "oracle" not in json.loads(capsys.readouterr().out)

    def test_seed_echo(self, instance_file, capsys):
        """Test that --seed wins over the instance seed."""
        document = dict(POLYGON_INSTANCE, options={"seed": 3})
        path = instance_file(document)

        escape_cli.main(["solve-polygon", "--input", path])
        assert json.loads(capsys.readouterr().out)["seed"] == 3
        escape_cli.main(["solve-polygon", "--seed", "11", "--input", path])
        assert json.loads(capsys.readouterr().out)["seed"] == 11

    def test_stdin_input(self, monkeypatch, capsys):
        """Test reading the instance from stdin."""
        monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(LINE_INSTANCE)))

        code = escape_cli.main(["solve-line"])

        assert code == escape_cli.EXIT_OK
        assert json.loads(capsys.readouterr().out)["mode"] == "line"

    def test_output_file(self, instance_file, capsys):
        """Test writing the document to --output."""
        with tempfile.TemporaryDirectory() as tmpdir:
            out = Path(tmpdir) / "solution.json"
            code = escape_cli.main(
                ["solve-polygon", "--input", instance_file(POLYGON_INSTANCE), "--output", str(out)]
            )

            assert code == escape_cli.EXIT_OK
            assert json.loads(out.read_text())["mode"] == "polygon"
        assert capsys.readouterr().out == ""


class TestErrors:
    """Tests for exit codes and error objects."""

    def test_malformed_json(self, instance_file, capsys):
        """Test that malformed input exits 2."""
        code = escape_cli.main(["solve-polygon", "--input", instance_file("{oops")])

        assert code == escape_cli.EXIT_VALIDATION
        assert _error(capsys.readouterr())["code"] == "invalid-json"

    def test_oversized_integer(self, instance_file, capsys):
        """Test that an integer too large for a float exits 2."""
        text = json.dumps(LINE_INSTANCE).replace('"x": -3.0', '"x": -' + "1" * 400)

        code = escape_cli.main(["solve-line", "--input", instance_file(text)])

        assert code == escape_cli.EXIT_VALIDATION
        assert _error(capsys.readouterr())["code"] == "invalid-json"

    def test_missing_field_pointer(self, instance_file, capsys):
        """Test that the error object carries a JSON pointer."""
        document = json.loads(json.dumps(POLYGON_INSTANCE))
        del document["vehicle"]["min_turn_radius"]

        code = escape_cli.main(["solve-polygon", "--input", instance_file(document)])
        error = _error(capsys.readouterr())

        assert code == escape_cli.EXIT_VALIDATION
        assert error["code"] == "missing-field"
        assert error["path"] == "/vehicle/min_turn_radius"

    def test_wrong_mode(self, instance_file, capsys):
        """Test that solve-line refuses a polygon instance."""
        code = escape_cli.main(["solve-line", "--input", instance_file(POLYGON_INSTANCE)])

        assert code == escape_cli.EXIT_VALIDATION
        assert _error(capsys.readouterr())["path"] == "/line"

    def test_non_convex_polygon(self, instance_file, capsys):
        """Test that a non-convex polygon exits 2 with its own code."""
        document = dict(POLYGON_INSTANCE, polygon={"vertices": [[0, 0], [2, 0], [2, 2], [1, 1], [0, 2]]})

        code = escape_cli.main(["solve-polygon", "--input", instance_file(document)])

        assert code == escape_cli.EXIT_VALIDATION
        assert _error(capsys.readouterr())["code"] == "non-convex"

    def test_vehicle_outside(self, instance_file, capsys):
        """Test that a vehicle outside the polygon exits 3."""
        document = json.loads(json.dumps(POLYGON_INSTANCE))
        document["vehicle"]["x"] = 2.0

        code = escape_cli.main(["solve-polygon", "--input", instance_file(document)])

        assert code == escape_cli.EXIT_DOMAIN
        assert _error(capsys.readouterr())["code"] == "outside-polygon"

    def test_vehicle_beyond_line(self, instance_file, capsys):
        """Test that a vehicle past the line exits 3."""
        document = json.loads(json.dumps(LINE_INSTANCE))
        document["vehicle"]["x"] = 1.0

        code = escape_cli.main(["solve-line", "--input", instance_file(document)])

        assert code == escape_cli.EXIT_DOMAIN
        assert _error(capsys.readouterr())["code"] == "outside-half-plane"

    def test_missing_input_file(self, capsys):
        """Test that an unreadable input exits 2."""
        code = escape_cli.main(["solve-line", "--input", "/nonexistent/problem.json"])

        assert code == escape_cli.EXIT_VALIDATION
        assert _error(capsys.readouterr())["code"] == "io-error"

    def test_bad_tie_tolerance(self, instance_file):
        """Test that a non-positive --tie-tol is an argument error."""
        with pytest.raises(SystemExit) as excinfo:
            escape_cli.main(["solve-polygon", "--tie-tol", "-1", "--input", instance_file(POLYGON_INSTANCE)])
        assert excinfo.value.code == 2

    def test_no_command(self, capsys):
        """Test that running without a command prints help."""
        assert escape_cli.main([]) == escape_cli.EXIT_VALIDATION
        assert "usage" in capsys.readouterr().out


class TestTraceCommand:
    """Tests for the trace subcommand."""

    def test_csv(self, instance_file, capsys):
        """Test the CSV trace ends on the reported exit point."""
        path = instance_file(POLYGON_INSTANCE)

        code = escape_cli.main(["trace", "--input", path, "--dt", "0.01"])
        samples = escape_io.read_trace_csv(capsys.readouterr().out)

        escape_cli.main(["solve-polygon", "--input", path])
        document = json.loads(capsys.readouterr().out)
        assert code == escape_cli.EXIT_OK
        assert samples[0].t == 0.0
        assert samples[-1].t == pytest.approx(document["escape_time"])
        assert samples[-1].position == pytest.approx(tuple(document["exit_point"]), abs=1e-9)

    def test_default_spacing(self, instance_file, capsys):
        """Test that the default spacing gives t_f / 256 steps plus the switch sample."""
        escape_cli.main(["trace", "--input", instance_file(POLYGON_INSTANCE)])
        samples = escape_io.read_trace_csv(capsys.readouterr().out)
        step = samples[-1].t / 256

        assert len(samples) == 258
        assert samples[1].t == pytest.approx(step)
        assert max(b.t - a.t for a, b in zip(samples, samples[1:])) <= step * (1 + 1e-9)

    def test_json(self, instance_file, capsys):
        """Test the JSON trace."""
        code = escape_cli.main(["trace", "--format", "json", "--input", instance_file(LINE_INSTANCE)])
        document = json.loads(capsys.readouterr().out)

        assert code == escape_cli.EXIT_OK
        assert document["samples"][0]["x"] == -3.0
        assert document["samples"][-1]["x"] == pytest.approx(0.0, abs=1e-9)

    def test_svg(self, instance_file, capsys):
        """Test that the SVG trace draws the optimal path and both ties."""
        code = escape_cli.main(["trace", "--format", "svg", "--input", instance_file(POLYGON_INSTANCE)])
        paths = read_svg_paths(capsys.readouterr().out)

        assert code == escape_cli.EXIT_OK
        (optimal,) = paths[OPTIMAL_CLASS]
        assert optimal[0] == pytest.approx((0.5, 0.5), abs=1e-9)
        assert optimal[-1][0] == pytest.approx(1.0, abs=1e-9)
        assert len(paths["tie-path"]) == 2


class TestFlowfieldCommand:
    """Tests for the flowfield subcommand."""

    def test_json(self, capsys):
        """Test the default JSON flowfield."""
        code = escape_cli.main(["flowfield", "--nx", "4", "--ntheta", "6"])
        document = json.loads(capsys.readouterr().out)

        assert code == escape_cli.EXIT_OK
        assert document["nx"] == 4 and document["ntheta"] == 6
        assert len(document["cells"]) == 24
        assert "hjb" not in document

    def test_csv(self, capsys):
        """Test the CSV flowfield."""
        code = escape_cli.main(["flowfield", "--format", "csv", "--nx", "3", "--ntheta", "4"])
        lines = capsys.readouterr().out.splitlines()

        assert code == escape_cli.EXIT_OK
        assert lines[0] == "x,theta,t_f,region,u0"
        assert len(lines) == 13

    def test_hjb_passes_on_fine_grid(self, capsys):
        """Test --check-hjb on a grid fine enough in theta."""
        code = escape_cli.main([
            "flowfield", "--check-hjb",
            "--x-range", "-2", "-1", "--nx", "26",
            "--theta-range", "0.2", "1.2", "--ntheta", "201",
        ])
        document = json.loads(capsys.readouterr().out)

        assert code == escape_cli.EXIT_OK
        assert document["hjb"]["passed"] is True
        assert document["hjb"]["max_residual"] < 1e-4

    def test_hjb_fails_on_coarse_theta(self, capsys):
        """Test that truncation error above the threshold exits 4."""
        code = escape_cli.main([
            "flowfield", "--check-hjb",
            "--x-range", "-2", "-1", "--nx", "26",
            "--theta-range", "0.2", "1.2", "--ntheta", "26",
        ])
        captured = capsys.readouterr()

        assert code == escape_cli.EXIT_VERIFICATION
        assert json.loads(captured.out)["hjb"]["passed"] is False
        assert _error(captured)["code"] == "hjb-threshold"

    def test_hjb_rejects_coarse_grid(self, capsys):
        """Test that a grid coarser than max_spacing exits 2."""
        code = escape_cli.main(["flowfield", "--check-hjb", "--nx", "4", "--ntheta", "6"])

        assert code == escape_cli.EXIT_VALIDATION
        assert _error(capsys.readouterr())["code"] == "invalid-grid"

    def test_rejects_positive_x(self, capsys):
        """Test that x ranges beyond the line exit 2."""
        code = escape_cli.main(["flowfield", "--x-range", "-1", "1"])

        assert code == escape_cli.EXIT_VALIDATION
        assert _error(capsys.readouterr())["code"] == "invalid-argument"


class TestPackageImport:
    """Tests for importing the scripts as a package."""

    def test_cli_runs_from_package(self, instance_file, capsys):
        """Test that scripts.escape_cli resolves its siblings inside the package."""
        package_cli = importlib.import_module("scripts.escape_cli")

        code = package_cli.main(["solve-line", "--input", instance_file(STRAIGHT_LINE_INSTANCE)])

        assert package_cli.solve_line.__module__ == "scripts.line_escape"
        assert code == package_cli.EXIT_OK
        assert json.loads(capsys.readouterr().out)["escape_time"] == 3.0
