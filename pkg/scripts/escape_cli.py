#!/usr/bin/env python3
"""
Dubins Escape Command-Line Interface

Solves minimum-time escape problems from JSON problem instances and emits
solution documents, traces and flowfields.

Usage:
    python scripts/escape_cli.py solve-line --input problem.json
    python scripts/escape_cli.py solve-polygon --input problem.json --certify
    python scripts/escape_cli.py trace --input problem.json --format svg --output path.svg
    python scripts/escape_cli.py flowfield --x-range -3 0 --nx 10 --ntheta 10 --check-hjb

Exit codes:
    0  success
    2  invalid input (malformed JSON, schema, polygon, arguments)
    3  solver error (vehicle outside the polygon or half-plane)
    4  verification failure (--certify, --check-hjb, --oracle)

Errors are written to stderr as {"error": {"code", "message", "path"}}.
"""

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional

from loguru import logger

# Handle both package and standalone execution
try:
    from . import escape_config
    from . import escape_io
    from .escape_geometry import (
        EscapeError,
        InvalidArgumentError,
        PolygonError,
        VehicleParams,
        to_edge_frame,
    )
    from .flowfield import build_flowfield
    from .line_escape import LineEscapeResult, solve_line
    from .plot_emit import TraceScene, render_svg
    from .polygon_escape import PolygonEscapeSolution, escape_certificate, solve_polygon
    from .trajectory import InvalidGridError, default_sample_dt, hjb_residual, oracle_min_time, propagate
except ImportError:
    import escape_config
    import escape_io
    from escape_geometry import (
        EscapeError,
        InvalidArgumentError,
        PolygonError,
        VehicleParams,
        to_edge_frame,
    )
    from flowfield import build_flowfield
    from line_escape import LineEscapeResult, solve_line
    from plot_emit import TraceScene, render_svg
    from polygon_escape import PolygonEscapeSolution, escape_certificate, solve_polygon
    from trajectory import InvalidGridError, default_sample_dt, hjb_residual, oracle_min_time, propagate


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DOMAIN = 3
EXIT_VERIFICATION = 4

# Errors in the input rather than in the problem it describes
VALIDATION_ERRORS = (
    escape_io.InstanceValidationError,
    escape_config.ConfigError,
    PolygonError,
    InvalidArgumentError,
    InvalidGridError,
)


def configure_logging(verbose: bool) -> None:
    """Send log output to stderr: WARNING by default, DEBUG with --verbose."""
    logger.remove()
    logger.add(lambda message: sys.stderr.write(message), level="DEBUG" if verbose else "WARNING")


def emit_error(code: str, message: str, path: str = "") -> None:
    error = {"error": {"code": code, "message": message, "path": path}}
    print(json.dumps(error), file=sys.stderr)


def _read_text(source: str) -> str:
    if source == "-":
        return sys.stdin.read()
    with open(source, "r") as f:
        return f.read()


def _write_text(target: str, text: str) -> None:
    if target == "-":
        sys.stdout.write(text)
        return
    with open(target, "w") as f:
        f.write(text)
    logger.debug(f"Wrote {len(text)} bytes to {target}")


def _load_instance(args: argparse.Namespace) -> escape_io.ProblemInstance:
    eps_rel = escape_config.get_eps_rel(args.config)
    return escape_io.parse_instance(_read_text(args.input), eps_rel=eps_rel)


def _require_mode(instance: escape_io.ProblemInstance, mode: str) -> None:
    if instance.mode != mode:
        raise escape_io.InstanceValidationError(
            f"this command needs a '{mode}' boundary, the instance has a '{instance.mode}'",
            code="missing-field",
            path=f"/{mode}"
        )


def _seed(args: argparse.Namespace, instance: escape_io.ProblemInstance) -> Optional[int]:
    return args.seed if args.seed is not None else instance.options.seed


def solve_line_instance(
    instance: escape_io.ProblemInstance,
    config: Optional[Path] = None
) -> LineEscapeResult:
    """Solve a line-mode instance in the line's local frame."""
    local = to_edge_frame(instance.pose, instance.line)
    return solve_line(
        local,
        instance.params,
        eps_geom=escape_config.get_eps_rel(config),
        **escape_config.get_line_tolerances(config)
    )


def solve_polygon_instance(
    instance: escape_io.ProblemInstance,
    tie_tol: Optional[float] = None,
    config: Optional[Path] = None
) -> PolygonEscapeSolution:
    """Solve a polygon-mode instance; --tie-tol beats the instance option."""
    if tie_tol is None:
        tie_tol = instance.options.tie_tol
    return solve_polygon(
        instance.pose,
        instance.params,
        instance.polygon,
        tie_tol,
        tie_tol_rel=escape_config.get_tie_tol_rel(config),
        **escape_config.get_line_tolerances(config)
    )


def cmd_solve_line(args: argparse.Namespace) -> int:
    """Solve an infinite-line escape and print its SolutionDocument."""
    instance = _load_instance(args)
    _require_mode(instance, "line")

    result = solve_line_instance(instance, args.config)
    document = escape_io.line_document(result, instance.line, instance.pose, seed=_seed(args, instance))

    status = EXIT_OK
    if args.oracle:
        local = to_edge_frame(instance.pose, instance.line)
        oracle = oracle_min_time(local, instance.params, **escape_config.get_oracle_settings(args.config))
        difference = abs(result.primary.t_f - oracle.t_best)
        passed = difference <= oracle.tolerance
        document["oracle"] = {
            "t_best": oracle.t_best,
            "tolerance": oracle.tolerance,
            "difference": difference,
            "passed": passed,
        }
        if not passed:
            emit_error(
                "oracle-mismatch",
                f"closed form {result.primary.t_f!r} differs from oracle {oracle.t_best!r} "
                f"by {difference:.3e} (tolerance {oracle.tolerance:.1e})"
            )
            status = EXIT_VERIFICATION

    _write_text(args.output, escape_io.dumps_document(document))
    return status


def cmd_solve_polygon(args: argparse.Namespace) -> int:
    """Solve a polygon escape, optionally certifying it."""
    instance = _load_instance(args)
    _require_mode(instance, "polygon")

    sol = solve_polygon_instance(instance, args.tie_tol, args.config)
    document = escape_io.polygon_document(sol, seed=_seed(args, instance))

    status = EXIT_OK
    if args.certify:
        report = escape_certificate(sol, instance.pose, instance.params, instance.polygon)
        document["certificate"] = {
            "passed": report.passed,
            "first_violation": report.first_violation,
            "checks": report.checks,
        }
        if not report.passed:
            emit_error("certificate-failed", report.first_violation or "certificate failed")
            status = EXIT_VERIFICATION

    _write_text(args.output, escape_io.dumps_document(document))
    return status


def _trace_inputs(instance: escape_io.ProblemInstance, args: argparse.Namespace):
    """Optimal schedule, tie schedules and escape time for either mode."""
    if instance.mode == "polygon":
        sol = solve_polygon_instance(instance, args.tie_tol, args.config)
        return sol.schedule, [r.solution.schedule for r in sol.ties], sol.t_f
    result = solve_line_instance(instance, args.config)
    return result.primary.schedule, [s.schedule for s in result.solutions], result.primary.t_f


def cmd_trace(args: argparse.Namespace) -> int:
    """Propagate the optimal path and write it as CSV, JSON or SVG."""
    instance = _load_instance(args)
    schedule, tie_schedules, t_f = _trace_inputs(instance, args)

    dt = args.dt if args.dt is not None else instance.options.sample_dt
    if dt is None:
        dt = default_sample_dt(t_f, escape_config.get_samples_per_escape(args.config))
    samples = propagate(instance.pose, instance.params, schedule, dt)

    if args.format == "csv":
        text = escape_io.trace_csv(samples)
    elif args.format == "json":
        text = escape_io.dumps_document(escape_io.trace_document(samples))
    else:
        scene = TraceScene(
            start=instance.pose,
            min_turn_radius=instance.params.min_turn_radius,
            optimal_path=[s.position for s in samples],
            tie_paths=[
                [s.position for s in propagate(instance.pose, instance.params, tie, dt)]
                for tie in tie_schedules
            ],
            polygon=instance.polygon.vertices if instance.polygon is not None else None,
            line=instance.line
        )
        text = render_svg(scene, **escape_config.get_svg_settings(args.config))

    _write_text(args.output, text)
    return EXIT_OK


def cmd_flowfield(args: argparse.Namespace) -> int:
    """Tabulate the line-escape synthesis over an (x, theta) grid."""
    params = VehicleParams(args.v, args.R)
    grid = build_flowfield(
        tuple(args.x_range),
        tuple(args.theta_range),
        args.nx,
        args.ntheta,
        params,
        **escape_config.get_line_tolerances(args.config)
    )

    report = None
    if args.check_hjb:
        report = hjb_residual(grid.to_value_grid(), params, **escape_config.get_hjb_settings(args.config))

    if args.format == "csv":
        _write_text(args.output, grid.to_csv())
        if report is not None:
            print(json.dumps({"hjb": report._asdict()}), file=sys.stderr)
    else:
        document: dict[str, Any] = {
            "tool_version": escape_io.TOOL_VERSION,
            "speed": params.speed,
            "min_turn_radius": params.min_turn_radius,
            **grid.to_dict(),
        }
        if report is not None:
            document["hjb"] = report._asdict()
        _write_text(args.output, escape_io.dumps_document(document))

    if report is not None and not report.passed:
        emit_error(
            "hjb-threshold",
            f"max residual {report.max_residual:.3e} at {report.location} "
            f"(threshold {report.threshold:.1e}, costate signs ok: {report.costate_sign_ok})"
        )
        return EXIT_VERIFICATION
    return EXIT_OK


def _positive_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Minimum-time escape of a Dubins vehicle from a line or convex polygon"
    )
    parser.add_argument(
        "--config",
        type=Path,
        default=escape_config.DEFAULT_CONFIG_PATH,
        help="Tolerance configuration file"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable debug logging")

    subparsers = parser.add_subparsers(dest="command", help="Commands")

    def instance_parser(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--input", default="-", help="Problem instance JSON (PATH or - for stdin)")
        sub.add_argument("--output", default="-", help="Output file (PATH or - for stdout)")
        sub.add_argument("--seed", type=int, help="Seed echoed into the solution document")
        return sub

    line_parser = instance_parser("solve-line", "Escape from an infinite line")
    line_parser.add_argument(
        "--oracle",
        action="store_true",
        help="Cross-check the escape time with the brute-force oracle (exit 4 on mismatch)"
    )

    polygon_parser = instance_parser("solve-polygon", "Escape from a convex polygon")
    polygon_parser.add_argument("--tie-tol", type=_positive_float, help="Absolute tie tolerance")
    polygon_parser.add_argument(
        "--certify",
        action="store_true",
        help="Verify the escape by forward propagation (exit 4 on failure)"
    )

    trace_parser = instance_parser("trace", "Sample the optimal path")
    trace_parser.add_argument("--dt", type=_positive_float, help="Sample spacing (default t_f/256)")
    trace_parser.add_argument("--format", choices=["csv", "json", "svg"], default="csv")
    trace_parser.add_argument("--tie-tol", type=_positive_float, help="Absolute tie tolerance")

    flow_parser = subparsers.add_parser("flowfield", help="Tabulate the line-escape flowfield")
    flow_parser.add_argument("--x-range", nargs=2, type=float, default=[-3.0, 0.0], metavar=("LO", "HI"))
    flow_parser.add_argument(
        "--theta-range",
        nargs=2,
        type=float,
        default=[-math.pi, math.pi],
        metavar=("LO", "HI")
    )
    flow_parser.add_argument("--nx", type=int, default=31)
    flow_parser.add_argument("--ntheta", type=int, default=72)
    flow_parser.add_argument("--v", type=float, default=1.0, help="Vehicle speed")
    flow_parser.add_argument("--R", type=float, default=1.0, help="Minimum turn radius")
    flow_parser.add_argument("--check-hjb", action="store_true", help="Check the HJB residual")
    flow_parser.add_argument("--format", choices=["json", "csv"], default="json")
    flow_parser.add_argument("--output", default="-", help="Output file (PATH or - for stdout)")

    return parser


COMMANDS = {
    "solve-line": cmd_solve_line,
    "solve-polygon": cmd_solve_polygon,
    "trace": cmd_trace,
    "flowfield": cmd_flowfield,
}


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    if not args.command:
        parser.print_help()
        return EXIT_VALIDATION

    try:
        return COMMANDS[args.command](args)
    except VALIDATION_ERRORS as e:
        emit_error(e.code, str(e), getattr(e, "path", ""))
        return EXIT_VALIDATION
    except EscapeError as e:
        emit_error(e.code, str(e), getattr(e, "path", ""))
        return EXIT_DOMAIN
    except OSError as e:
        emit_error("io-error", str(e))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
