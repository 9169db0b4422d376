"""Session configuration: what to read, what to listen to, what to show.

Config files are JSON. The input source is a tagged union: exactly one of
``live``, ``replay``, or ``simulator`` must be present, and every
referenced file must exist before the session starts rather than failing
mid-read.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from ..director import BIOFEEDBACK, validate_policy

DEFAULT_UI_HOST = "127.0.0.1"
DEFAULT_UI_PORT = 8080
DEFAULT_DEBOUNCE = 2.0
DEFAULT_CADENCE = 1.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LiveSource:
    host: str = "127.0.0.1"
    port: int = 16571


@dataclass(frozen=True)
class ReplaySource:
    path: str
    speed: str = "realtime"  # or "max" for headless runs


@dataclass(frozen=True)
class SimSource:
    """Reader-steered simulation: sliders set construct targets directly."""

    scenario_path: str | None = None
    seed: int = 0
    cadence: float = DEFAULT_CADENCE  # state updates per second


InputSource = LiveSource | ReplaySource | SimSource


@dataclass(frozen=True)
class SessionConfig:
    story_path: str
    source: InputSource
    model_paths: dict[str, str] = field(default_factory=dict)
    policy: str = BIOFEEDBACK
    allow_covert: bool = False
    ui_host: str = DEFAULT_UI_HOST
    ui_port: int = DEFAULT_UI_PORT
    record_path: str | None = None
    window: int | None = None  # director global-variable window; None = latest
    debounce: float = DEFAULT_DEBOUNCE
    reset_tags: tuple[str, ...] = ()

    def validated(self) -> SessionConfig:
        problems: list[str] = []
        if not os.path.isfile(self.story_path):
            problems.append(f"story file not found: {self.story_path}")
        if isinstance(self.source, ReplaySource):
            if not os.path.isfile(self.source.path):
                problems.append(f"replay file not found: {self.source.path}")
            if self.source.speed not in ("realtime", "max"):
                problems.append(f"unknown replay speed {self.source.speed!r}")
        if isinstance(self.source, SimSource):
            if self.source.scenario_path and not os.path.isfile(self.source.scenario_path):
                problems.append(f"scenario file not found: {self.source.scenario_path}")
            if self.source.cadence <= 0:
                problems.append("simulator cadence must be positive")
        for construct, path in sorted(self.model_paths.items()):
            if not os.path.isfile(path):
                problems.append(f"{construct} model not found: {path}")
        try:
            validate_policy(self.policy, self.allow_covert)
        except ValueError as exc:
            problems.append(str(exc))
        if self.debounce < 0:
            problems.append("debounce must be nonnegative")
        if self.record_path:
            parent = os.path.dirname(os.path.abspath(self.record_path))
            if not os.path.isdir(parent):
                problems.append(f"recording directory not found: {parent}")
        if problems:
            raise ConfigError("; ".join(problems))
        return self


_SOURCE_KEYS = ("live", "replay", "simulator")


def _parse_source(raw: dict) -> InputSource:
    present = [k for k in _SOURCE_KEYS if k in raw]
    if len(present) != 1:
        raise ConfigError(
            f"config needs exactly one input source of {_SOURCE_KEYS}, found {present or 'none'}"
        )
    key = present[0]
    value = raw[key]
    if key == "live":
        value = value or {}
        return LiveSource(
            host=str(value.get("host", "127.0.0.1")), port=int(value.get("port", 16571))
        )
    if key == "replay":
        if isinstance(value, str):
            return ReplaySource(path=value)
        return ReplaySource(path=str(value["path"]), speed=str(value.get("speed", "realtime")))
    value = value or {}
    return SimSource(
        scenario_path=value.get("scenario"),
        seed=int(value.get("seed", 0)),
        cadence=float(value.get("cadence", DEFAULT_CADENCE)),
    )


def load_config(path) -> SessionConfig:
    """Parse and validate a session config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "story" not in raw:
        raise ConfigError("config needs a 'story' path")
    if "input" not in raw or not isinstance(raw["input"], dict):
        raise ConfigError("config needs an 'input' object naming the source")

    config = SessionConfig(
        story_path=str(raw["story"]),
        source=_parse_source(raw["input"]),
        model_paths={str(k): str(v) for k, v in (raw.get("models") or {}).items()},
        policy=str(raw.get("policy", BIOFEEDBACK)),
        allow_covert=bool(raw.get("allow_covert", False)),
        ui_host=str(raw.get("ui", {}).get("host", DEFAULT_UI_HOST)),
        ui_port=int(raw.get("ui", {}).get("port", DEFAULT_UI_PORT)),
        record_path=raw.get("record"),
        window=raw.get("window"),
        debounce=float(raw.get("debounce", DEFAULT_DEBOUNCE)),
        reset_tags=tuple(raw.get("reset_tags", ())),
    )
    return config.validated()
