"""Layered run configuration for the CLI.

Precedence, highest first: explicit command-line flags, values from a
--config JSON file, the STAINLAB_OUT environment variable (output root
only), built-in defaults.  The resolved mapping is echoed so every run
records what it actually used.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Mapping

from .errors import InvalidArgumentError

ENV_OUT = "STAINLAB_OUT"

# Desk profile: small enough to iterate on a laptop CPU.
DESK_PROFILE = {
    "fov_width": 512,
    "fov_height": 512,
    "patch_size": 64,
    "patch_count": 30,
    "n_fovs": 2,
    "steps": 300,
}

# Full protocol scale; slow, for faithful reproduction runs.
PAPER_PROFILE = {
    "fov_width": 1586,
    "fov_height": 1540,
    "patch_size": 256,
    "patch_count": 30,
    "n_fovs": 10,
    "steps": 15000,
}


def load_config_file(path: str | Path) -> dict:
    """Parse a flat JSON object of option overrides."""
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"config file {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidArgumentError(f"config file {path} must hold a JSON object")
    return doc


def scale_profile(paper_scale: bool) -> dict:
    return dict(PAPER_PROFILE if paper_scale else DESK_PROFILE)


def resolve_options(
    cli: Mapping[str, Any],
    defaults: Mapping[str, Any],
    config_path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
) -> tuple[dict, dict]:
    """Merge option layers; returns (values, sources).

    ``cli`` holds only flags the user actually passed (None means unset).
    Unknown keys in the config file are rejected so typos fail loudly.
    """
    env = os.environ if env is None else env
    file_values = load_config_file(config_path) if config_path else {}
    unknown = sorted(set(file_values) - set(defaults))
    if unknown:
        raise InvalidArgumentError(
            f"config file sets unknown options {unknown}; "
            f"valid: {sorted(defaults)}"
        )
    values: dict = {}
    sources: dict = {}
    for key, fallback in defaults.items():
        if cli.get(key) is not None:
            values[key] = cli[key]
            sources[key] = "flag"
        elif key in file_values:
            values[key] = file_values[key]
            sources[key] = "config"
        elif key == "out" and env.get(ENV_OUT):
            values[key] = env[ENV_OUT]
            sources[key] = "env"
        else:
            values[key] = fallback
            sources[key] = "default"
    return values, sources


def echo_resolved(values: Mapping[str, Any], sources: Mapping[str, Any]) -> str:
    """One-line summary of the effective configuration."""
    parts = [f"{k}={values[k]}({sources[k]})" for k in sorted(values)]
    return "resolved: " + " ".join(parts)


def write_resolved(out_dir: str | Path, command: str, values: Mapping[str, Any]):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, **{k: _jsonable(v) for k, v in values.items()}}
    (out_dir / "resolved_config.json").write_text(json.dumps(doc, indent=2, sort_keys=True))


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    return v
