#!/usr/bin/env python3
"""
Escape I/O Module

Problem-instance parsing and validation, solution documents and trace
codecs for the escape CLI.

Problem instances are JSON documents checked against
docs/problem_instance.schema.json before anything is solved. Validation
failures carry a JSON pointer to the offending field.
"""

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

from jsonschema import Draft7Validator
from jsonschema.exceptions import best_match

# Handle both package and standalone execution
try:
    from .escape_geometry import (
        DEFAULT_EPS_REL,
        ConvexPolygon,
        EdgeFrame,
        EscapeError,
        GlobalPose,
        VehicleParams,
        exit_point,
        line_frame,
        validate_polygon,
        world_heading,
    )
    from .line_escape import ControlSchedule, LineEscapeResult, LineEscapeSolution, Strategy
    from .polygon_escape import EdgeReport, PolygonEscapeSolution
    from .trajectory import PathSample
except ImportError:
    from escape_geometry import (
        DEFAULT_EPS_REL,
        ConvexPolygon,
        EdgeFrame,
        EscapeError,
        GlobalPose,
        VehicleParams,
        exit_point,
        line_frame,
        validate_polygon,
        world_heading,
    )
    from line_escape import ControlSchedule, LineEscapeResult, LineEscapeSolution, Strategy
    from polygon_escape import EdgeReport, PolygonEscapeSolution
    from trajectory import PathSample


TOOL_VERSION = "0.1.0"

SCHEMA_PATH = Path(__file__).parent.parent / "docs" / "problem_instance.schema.json"

TRACE_COLUMNS = ("t", "x", "y", "theta", "u")


class InstanceValidationError(EscapeError):
    """
    Raised when a problem instance cannot be accepted.

    ``path`` is a JSON pointer to the offending field ("" for the whole
    document).
    """

    code = "invalid-instance"

    def __init__(self, message: str, code: Optional[str] = None, path: str = ""):
        super().__init__(message, code)
        self.path = path


@dataclass(frozen=True)
class InstanceOptions:
    tie_tol: Optional[float] = None
    sample_dt: Optional[float] = None
    seed: Optional[int] = None


@dataclass(frozen=True)
class ProblemInstance:
    """Validated problem: exactly one of polygon / line is set."""

    pose: GlobalPose
    params: VehicleParams
    polygon: Optional[ConvexPolygon] = None
    line: Optional[EdgeFrame] = None
    options: InstanceOptions = InstanceOptions()

    @property
    def mode(self) -> str:
        return "polygon" if self.polygon is not None else "line"


def _pointer(parts: Iterable[Any]) -> str:
    return "".join("/" + str(part).replace("~", "~0").replace("/", "~1") for part in parts)


def _finite_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"number {text} is out of range")
    return value


def _finite_int(text: str) -> int:
    value = int(text)
    try:
        float(value)
    except OverflowError as e:
        raise ValueError(f"integer with {len(text)} digits is out of range") from e
    return value


def _reject_constant(name: str) -> float:
    raise ValueError(f"non-finite number {name} is not allowed")


def load_schema(path: Path = SCHEMA_PATH) -> dict[str, Any]:
    """Load the ProblemInstance JSON schema."""
    with open(path, "r") as f:
        return json.load(f)


def validate_document(document: Any, schema: Optional[dict[str, Any]] = None) -> None:
    """
    Check a decoded document against the ProblemInstance schema.

    Raises:
        InstanceValidationError: For the most relevant schema violation.
    """
    validator = Draft7Validator(schema if schema is not None else load_schema())
    error = best_match(validator.iter_errors(document))
    if error is None:
        return

    path = _pointer(error.absolute_path)
    if error.validator == "required":
        code = "missing-field"
        instance = error.instance if isinstance(error.instance, dict) else {}
        missing = [key for key in error.validator_value if key not in instance]
        if missing:
            path += _pointer([missing[0]])
    elif error.validator == "additionalProperties":
        code = "unknown-field"
    else:
        code = "schema-violation"
    raise InstanceValidationError(error.message, code=code, path=path)


def parse_instance(text: str, *, eps_rel: float = DEFAULT_EPS_REL) -> ProblemInstance:
    """
    Parse and validate a ProblemInstance JSON document.

    Args:
        text: Raw JSON text.
        eps_rel: Relative geometric tolerance for polygon validation.

    Returns:
        The validated ProblemInstance.

    Raises:
        InstanceValidationError: Malformed JSON, non-finite numbers, schema
            violations, or an invalid polygon / line.
    """
    try:
        document = json.loads(
            text,
            parse_float=_finite_float,
            parse_int=_finite_int,
            parse_constant=_reject_constant
        )
    except ValueError as e:
        raise InstanceValidationError(f"malformed JSON: {e}", code="invalid-json") from e

    validate_document(document)

    vehicle = document["vehicle"]
    pose = GlobalPose((vehicle["x"], vehicle["y"]), vehicle["heading_rad"])
    params = VehicleParams(float(vehicle["speed"]), float(vehicle["min_turn_radius"]))

    polygon = None
    line = None
    if "polygon" in document:
        try:
            polygon = validate_polygon(document["polygon"]["vertices"], eps_rel)
        except EscapeError as e:
            raise InstanceValidationError(str(e), code=e.code, path="/polygon/vertices") from e
    else:
        try:
            line = line_frame(document["line"]["point"], document["line"]["outward_normal"])
        except EscapeError as e:
            raise InstanceValidationError(str(e), code=e.code, path="/line/outward_normal") from e

    options = document.get("options", {})
    return ProblemInstance(
        pose=pose,
        params=params,
        polygon=polygon,
        line=line,
        options=InstanceOptions(
            tie_tol=options.get("tie_tol"),
            sample_dt=options.get("sample_dt"),
            seed=options.get("seed")
        )
    )


def strategy_dict(strategy: Strategy) -> dict[str, Any]:
    return {"kind": strategy.kind.value, "direction": strategy.direction}


def schedule_list(schedule: ControlSchedule) -> list[dict[str, Any]]:
    return [{"u": phase.u, "duration": phase.duration} for phase in schedule]


def _edge_summary(report: EdgeReport) -> dict[str, Any]:
    return {
        "edge_index": report.edge_index,
        "escape_time": report.t_f,
        "strategy": strategy_dict(report.solution.strategy),
        "region": report.solution.region.value,
        "exit_point": list(report.exit_point_world),
        "exit_on_segment": report.exit_on_segment,
        "local_state": {"x": report.local_state.x, "theta": report.local_state.theta},
    }


def _tie_entry(report: EdgeReport) -> dict[str, Any]:
    return {
        "edge_index": report.edge_index,
        "escape_time": report.t_f,
        "strategy": strategy_dict(report.solution.strategy),
        "exit_point": list(report.exit_point_world),
    }


def line_document(
    result: LineEscapeResult,
    frame: EdgeFrame,
    pose: GlobalPose,
    seed: Optional[int] = None
) -> dict[str, Any]:
    """SolutionDocument for an infinite-line escape; ties list both mirror turns on the dispersal line."""

    def tie(solution: LineEscapeSolution) -> dict[str, Any]:
        return {
            "edge_index": None,
            "escape_time": solution.t_f,
            "strategy": strategy_dict(solution.strategy),
            "exit_point": list(exit_point(frame, pose, solution.y_f)),
        }

    primary = result.primary
    document = {
        "tool_version": TOOL_VERSION,
        "mode": "line",
        "escape_time": primary.t_f,
        "strategy": strategy_dict(primary.strategy),
        "region": primary.region.value,
        "exit_point": list(exit_point(frame, pose, primary.y_f)),
        "final_heading_rad": world_heading(frame, primary.theta_f),
        "control_schedule": schedule_list(primary.schedule),
        "ties": [tie(solution) for solution in result.solutions],
        "per_edge": [],
    }
    if seed is not None:
        document["seed"] = seed
    return document


def polygon_document(sol: PolygonEscapeSolution, seed: Optional[int] = None) -> dict[str, Any]:
    """SolutionDocument for a polygon escape."""
    best = sol.best
    document = {
        "tool_version": TOOL_VERSION,
        "mode": "polygon",
        "escape_time": sol.t_f,
        "strategy": strategy_dict(best.solution.strategy),
        "region": best.solution.region.value,
        "exit_point": list(best.exit_point_world),
        "final_heading_rad": best.exit_heading_world,
        "edge_index": best.edge_index,
        "control_schedule": schedule_list(sol.schedule),
        "ties": [_tie_entry(report) for report in sol.ties],
        "per_edge": [_edge_summary(report) for report in sol.per_edge],
    }
    if seed is not None:
        document["seed"] = seed
    return document


def dumps_document(document: dict[str, Any]) -> str:
    """Serialize a document; floats use shortest round-trip repr."""
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def trace_csv(samples: Iterable[PathSample]) -> str:
    """Render samples as CSV with header t,x,y,theta,u."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for sample in samples:
        writer.writerow([sample.t, sample.position[0], sample.position[1], sample.heading, sample.u])
    return buffer.getvalue()


def read_trace_csv(text: str) -> list[PathSample]:
    """
    Parse a trace CSV back into samples.

    Raises:
        InstanceValidationError: If the header is not t,x,y,theta,u.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != TRACE_COLUMNS:
        raise InstanceValidationError(
            f"trace header must be {','.join(TRACE_COLUMNS)}, got {header}",
            code="invalid-trace"
        )
    return [
        PathSample(float(t), (float(x), float(y)), float(theta), int(u))
        for t, x, y, theta, u in reader
    ]


def trace_document(samples: Iterable[PathSample]) -> dict[str, Any]:
    return {
        "tool_version": TOOL_VERSION,
        "samples": [
            {"t": s.t, "x": s.position[0], "y": s.position[1], "theta": s.heading, "u": s.u}
            for s in samples
        ],
    }
