"""
Dubins Escape Scripts

Minimum-time escape of a constant-speed, bounded-turn-rate vehicle from an
infinite line and from a convex polygon, with independent verification.

Modules:
    escape_geometry: Poses, angles, convex polygons and edge-local frames
    line_escape: Closed-form escape across a single line
    polygon_escape: Minimum over edges, ties and the escape certificate
    trajectory: Exact propagation, line crossings, oracle and HJB checks
    flowfield: (x, theta) grids of the line-escape synthesis
    plot_emit: SVG rendering of escape traces
    escape_io: Problem-instance validation and output documents
    escape_config: YAML / environment configuration
    escape_cli: Command-line interface
"""

__version__ = "0.1.0"
