"""Experiment configuration: flat dotted keys, text or JSON on disk.

Text grammar (one assignment per line)::

    # comment
    suite = fig1-top
    smc.particles = 16
    smc.alpha = 1.0

Values parse as JSON scalars where possible (numbers, true/false, null,
quoted strings) and fall back to the raw string.  A ``.json`` file may hold
either the flat mapping or nested objects, which are flattened with dots.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError


def flatten(doc: dict, prefix: str = "") -> dict:
    out = {}
    for key, val in doc.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(flatten(val, prefix=f"{name}."))
        else:
            out[name] = val
    return out


def parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_text(text: str) -> dict:
    cfg = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        cfg[key] = parse_value(raw.strip())
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return flatten(doc)
    return parse_config_text(text)


def merge_config(defaults: dict, *overrides: dict) -> dict:
    """Layer overrides onto suite defaults; unknown keys are an error."""
    cfg = dict(defaults)
    for layer in overrides:
        unknown = sorted(set(layer) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(layer)
    return cfg


def render_config(cfg: dict) -> str:
    lines = [f"{key} = {json.dumps(cfg[key])}" for key in sorted(cfg)]
    return "\n".join(lines) + "\n"
