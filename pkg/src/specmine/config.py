"""Run configuration: defaults, config file, and CLI precedence.

Precedence is CLI flags > config file > defaults. The config file is plain
``key = value`` text (strings may be quoted; ints, floats, and booleans are
recognized), with ``#`` comments.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

API_KEY_ENV_VARS = ("SPECMINE_API_KEY", "OPENAI_API_KEY")

CASSETTE_MODES = ("record", "replay", "passthrough")


@dataclass(frozen=True)
class RunConfig:
    model: str = "gpt-oss-20b"
    temperature: float = 0.8
    retry_budget: int = 3
    window_size: int = 60
    overlap: int = 10
    block_size: int = 20
    fallback_lines: int = 10
    max_window_tokens: int = 3000
    cassette_mode: str = "replay"
    cassette_path: str | None = None
    base_url: str = "http://localhost:8000"
    output_dir: str = "out"
    prompt_dir: str | None = None

    def __post_init__(self) -> None:
        if self.cassette_mode not in CASSETTE_MODES:
            raise ConfigError(f"cassette_mode must be one of {CASSETTE_MODES}, got {self.cassette_mode!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError(f"temperature {self.temperature} outside [0, 2]")
        if self.retry_budget < 0:
            raise ConfigError("retry_budget must be >= 0")
        if self.overlap < 0 or self.window_size <= self.overlap:
            raise ConfigError("window_size must exceed overlap and overlap must be >= 0")

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(raw: str) -> object:
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def load_config_file(path: str | Path) -> dict:
    """Parse a key = value config file into a plain dict."""
    values: dict[str, object] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        values[key.strip()] = _coerce(raw)
    return values


def build_config(file_path: str | Path | None = None, **cli_overrides) -> RunConfig:
    """Merge defaults, an optional config file, and CLI overrides."""
    known = {f.name for f in fields(RunConfig)}
    merged: dict[str, object] = {}
    if file_path is not None:
        for key, value in load_config_file(file_path).items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = value
    for key, value in cli_overrides.items():
        if value is not None:
            merged[key] = value
    config = RunConfig()
    return replace(config, **merged) if merged else config


def api_key_from_env() -> str | None:
    for name in API_KEY_ENV_VARS:
        value = os.environ.get(name)
        if value:
            return value
    return None
