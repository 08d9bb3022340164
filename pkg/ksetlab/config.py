"""Lab configuration: one optional file, an optional ``.env`` file and ``KSA_*`` variables.

The CLI merges its own flags over the file, then falls back to the environment for keys that are
still unset. Keys may be nested (``fuzz: {runs: 10}``) or flat (``fuzz_runs: 10``).
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .model import KsetLabError

try:  # pragma: no cover - optional dependency
    import tomllib  # type: ignore[attr-defined]
except ModuleNotFoundError:  # pragma: no cover - Python <3.11 fallback
    tomllib = None  # type: ignore[assignment]


CONFIG_STEM = "ksetlab.config"
CONFIG_SUFFIXES: tuple[str, ...] = (".yaml", ".yml", ".json", ".toml")
DEFAULT_ENV_FILE = ".env"


class ConfigError(KsetLabError):
    """A configuration file is missing, unreadable or not a mapping."""


def find_config(explicit: Optional[str] = None, directory: Optional[Path] = None) -> Optional[Path]:
    """Resolve the configuration file to read, or ``None`` when there is none.

    An explicit path must exist. Without one, ``ksetlab.config.<suffix>`` is looked up in
    ``directory`` (the working directory by default) in suffix order.
    """

    if explicit:
        path = Path(explicit).expanduser()
        if not path.is_file():
            raise ConfigError(f"Configuration file {path} does not exist")
        return path
    base = directory or Path.cwd()
    return next(
        (base / f"{CONFIG_STEM}{suffix}" for suffix in CONFIG_SUFFIXES if (base / f"{CONFIG_STEM}{suffix}").is_file()),
        None,
    )


def read_structured(path: Path, text: Optional[str] = None) -> Any:
    """Parse YAML, JSON or TOML by suffix.

    YAML and JSON errors propagate unchanged so callers can report the offending line.
    """

    body = path.read_text(encoding="utf-8") if text is None else text
    suffix = path.suffix.lower()
    if suffix in (".yaml", ".yml"):
        return yaml.safe_load(body)
    if suffix == ".json":
        return json.loads(body) if body.strip() else {}
    if suffix == ".toml":
        if tomllib is None:
            raise ConfigError("TOML files need Python 3.11+ (tomllib)")
        return tomllib.loads(body)
    raise ConfigError(f"Unsupported file format: {path.suffix or path.name}")


def load_config(path: Optional[str]) -> Dict[str, Any]:
    target = find_config(path)
    if target is None:
        return {}
    try:
        data = read_structured(target)
    except (json.JSONDecodeError, yaml.YAMLError, ValueError) as exc:
        raise ConfigError(f"Failed to parse {target}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{target}: the configuration root must be a mapping")
    return data


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive merge, ``override`` winning; neither input is modified."""

    merged = dict(base)
    for key, value in override.items():
        current = merged.get(key)
        merged[key] = merge_config(current, value) if isinstance(current, dict) and isinstance(value, dict) else value
    return merged


def lookup(config: Dict[str, Any], dotted: str) -> Any:
    """``fuzz.runs`` reads ``config["fuzz"]["runs"]``, falling back to a flat ``fuzz_runs`` key."""

    node: Any = config
    for part in dotted.split("."):
        node = node.get(part) if isinstance(node, dict) else None
        if node is None:
            break
    if node is not None:
        return node
    return config.get(dotted.replace(".", "_"))


def _unquote(raw: str) -> str:
    value = raw.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


def load_env_file(path: Optional[Union[Path, str]] = None) -> None:
    """Export ``KEY=value`` lines into ``os.environ``; variables that are already set win."""

    env_path = Path(path) if path is not None else Path(DEFAULT_ENV_FILE)
    if not env_path.is_file():
        return
    for line in env_path.read_text(encoding="utf-8").splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#") or "=" not in stripped:
            continue
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key:
            os.environ.setdefault(key, _unquote(raw))
