#!/usr/bin/env python3
"""
Escape Solver Configuration

Tunables are read from config/escape.yml and environment variables.
Environment variables take precedence over the file; missing keys fall
back to the built-in defaults below.

Environment overrides:
    ESCAPE_TIE_TOL_REL     relative tie tolerance for polygon escapes
    ESCAPE_ORACLE_GRID_N   oracle turn-duration grid size
    ESCAPE_HJB_THRESHOLD   maximum acceptable HJB residual
"""

import os
from pathlib import Path
from typing import Any, Callable, Optional

import yaml


DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "config" / "escape.yml"

DEFAULTS: dict[str, dict[str, Any]] = {
    "geometry": {"eps_rel": 1e-9},
    "line": {"straight_tol": 1e-9, "dispersal_tol": 1e-9},
    "polygon": {"tie_tol_rel": 1e-9},
    "oracle": {"grid_n": 4096, "refine_tol": 1e-10},
    "hjb": {
        "max_spacing": 0.05,
        "singular_margin": 0.05,
        "band_factor": 2.0,
        "residual_threshold": 1e-4,
    },
    "trace": {"samples_per_escape": 256},
    "svg": {"width": 640, "margin": 24},
}


class ConfigError(ValueError):
    """Raised for malformed configuration files or environment overrides."""

    code = "invalid-config"


def load_escape_config(path: Optional[Path] = None) -> dict[str, dict[str, Any]]:
    """
    Load the configuration file merged over the defaults.

    A missing file yields the defaults unchanged.
    """
    config_path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    config = {section: dict(values) for section, values in DEFAULTS.items()}

    if not config_path.exists():
        return config

    with open(config_path, "r") as f:
        loaded = yaml.safe_load(f) or {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"{config_path}: top level must be a mapping")

    for section, values in loaded.items():
        if not isinstance(values, dict):
            raise ConfigError(f"{config_path}: section '{section}' must be a mapping")
        config.setdefault(section, {}).update(values)
    return config


def _env_override(name: str, parse: Callable[[str], Any]) -> Any:
    raw = os.environ.get(name)
    if not raw:
        return None
    try:
        return parse(raw)
    except ValueError as e:
        raise ConfigError(f"{name}={raw!r} is not valid: {e}") from e


def _positive_float(raw: str) -> float:
    value = float(raw)
    if not value > 0 or value == float("inf"):
        raise ValueError("expected a positive finite number")
    return value


def _grid_size(raw: str) -> int:
    value = int(raw)
    if value < 100:
        raise ValueError("expected an integer >= 100")
    return value


def _lookup(section: str, key: str, path: Optional[Path]) -> Any:
    config = load_escape_config(path)
    return config.get(section, {}).get(key, DEFAULTS[section][key])


def get_eps_rel(path: Optional[Path] = None) -> float:
    """Get the relative geometric tolerance from config."""
    return float(_lookup("geometry", "eps_rel", path))


def get_tie_tol_rel(path: Optional[Path] = None) -> float:
    """Get the relative tie tolerance from environment or config."""
    value = _env_override("ESCAPE_TIE_TOL_REL", _positive_float)
    if value is not None:
        return value
    return float(_lookup("polygon", "tie_tol_rel", path))


def get_oracle_grid_n(path: Optional[Path] = None) -> int:
    """Get the oracle grid size from environment or config."""
    value = _env_override("ESCAPE_ORACLE_GRID_N", _grid_size)
    if value is not None:
        return value
    return int(_lookup("oracle", "grid_n", path))


def get_oracle_settings(path: Optional[Path] = None) -> dict[str, Any]:
    """Keyword arguments for trajectory.oracle_min_time."""
    return {
        "grid_n": get_oracle_grid_n(path),
        "refine_tol": float(_lookup("oracle", "refine_tol", path)),
    }


def get_hjb_threshold(path: Optional[Path] = None) -> float:
    """Get the HJB residual threshold from environment or config."""
    value = _env_override("ESCAPE_HJB_THRESHOLD", _positive_float)
    if value is not None:
        return value
    return float(_lookup("hjb", "residual_threshold", path))


def get_line_tolerances(path: Optional[Path] = None) -> dict[str, float]:
    """Straight-only and dispersal heading tolerances."""
    config = load_escape_config(path)
    return {
        "straight_tol": float(config["line"]["straight_tol"]),
        "dispersal_tol": float(config["line"]["dispersal_tol"]),
    }


def get_hjb_settings(path: Optional[Path] = None) -> dict[str, float]:
    """Keyword arguments for trajectory.hjb_residual."""
    hjb = load_escape_config(path)["hjb"]
    return {
        "max_spacing": float(hjb["max_spacing"]),
        "singular_margin": float(hjb["singular_margin"]),
        "band_factor": float(hjb["band_factor"]),
        "threshold": get_hjb_threshold(path),
    }


def get_samples_per_escape(path: Optional[Path] = None) -> int:
    return int(_lookup("trace", "samples_per_escape", path))


def get_svg_settings(path: Optional[Path] = None) -> dict[str, float]:
    svg = load_escape_config(path)["svg"]
    return {"width": float(svg["width"]), "margin": float(svg["margin"])}
