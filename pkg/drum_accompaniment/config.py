"""Configuration management for the drum accompaniment package."""

import logging
import os
from pathlib import Path
from typing import Any, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError
from rich.logging import RichHandler

from .errors import ConfigError
from .schema import CliConfig

load_dotenv()

# Package Information
PACKAGE_NAME = "drum-accompaniment"
VERSION = "0.1.0"

# Environment Settings
LOG_LEVEL = os.getenv("DRUM_ACCOMPANIMENT_LOG_LEVEL", "INFO").upper()

# File Paths
# runs land in RUN_DIR/default unless the config names paths.run_dir
RUN_DIR = Path(os.getenv("DRUM_ACCOMPANIMENT_RUN_DIR", "runs"))


def setup_logging(level: Optional[str] = None) -> None:
    """Attach a rich handler to the package logger."""
    logger = logging.getLogger("drum_accompaniment")
    logger.setLevel(level or LOG_LEVEL)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        logger.addHandler(RichHandler(show_path=False, rich_tracebacks=True))
    logger.propagate = False


def validate_config(config: CliConfig) -> None:
    """Create the directories a run writes to."""
    Path(config.paths.run_dir).mkdir(parents=True, exist_ok=True)
    Path(config.paths.corpus_dir).parent.mkdir(parents=True, exist_ok=True)


def _set_path(tree: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = tree
    for key in keys[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigError("cannot override a scalar with a section", field_path=dotted)
        node = child
    node[keys[-1]] = value


def parse_overrides(overrides: list[str]) -> dict:
    """Turn ``a.b=value`` strings into a nested dict; values use YAML scalar rules."""
    tree: dict = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        key, raw = item.split("=", 1)
        _set_path(tree, key.strip(), yaml.safe_load(raw))
    return tree


def _merge(base: dict, extra: dict) -> dict:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: Optional[str | Path] = None, overrides: Optional[list[str]] = None) -> CliConfig:
    """Read a YAML config, apply overrides and re-validate every invariant."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        raw = yaml.safe_load(path.read_text()) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path} must contain a mapping at the top level")
    raw = _merge(raw, parse_overrides(overrides or []))
    raw = _merge({"paths": {"run_dir": str(RUN_DIR / "default")}}, raw)
    try:
        return CliConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        field_path = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(first["msg"], field_path=field_path) from exc


def dump_config(config: CliConfig) -> dict:
    return config.model_dump(mode="json")
