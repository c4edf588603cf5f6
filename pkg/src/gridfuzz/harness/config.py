"""Experiment configuration: defaults, JSON config files, and CLI overrides."""

from __future__ import annotations

import dataclasses
import json
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..search import GAConfig
from ..scenario import ScenarioTemplate

TECHNIQUES = ("pafot", "avfuzzer", "random")
OUTPUT_ENV = "GRIDFUZZ_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    technique: str = "pafot"
    runs: int = 10
    seed: int = 0
    ga: GAConfig = field(default_factory=GAConfig)
    scenario: ScenarioTemplate = field(default_factory=ScenarioTemplate)
    output_dir: str = field(default_factory=lambda: os.environ.get(OUTPUT_ENV, "gridfuzz-out"))
    persist_traces: bool = True

    def __post_init__(self):
        if self.technique not in TECHNIQUES:
            raise ConfigError(f"technique must be one of {TECHNIQUES}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")

    def to_dict(self) -> dict:
        return to_dict(self)


def to_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [to_dict(x) for x in obj]
    return obj


def _coerce(tp, value):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value)
    if origin is tuple:
        return tuple(value)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return value if value is None else _coerce(args[0], value)
    if tp is float and isinstance(value, int):
        return float(value)
    return value


def from_dict(cls, data: dict):
    """Build a (nested) frozen dataclass, keeping defaults for missing keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"expected an object for {cls.__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {k: _coerce(hints[k], v) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


def merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: Optional[str | Path] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Defaults, then the config file, then ``overrides`` (e.g. from CLI flags)."""
    data = to_dict(ExperimentConfig())
    if path is not None:
        try:
            data = merge(data, json.loads(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if overrides:
        data = merge(data, overrides)
    return from_dict(ExperimentConfig, data)
