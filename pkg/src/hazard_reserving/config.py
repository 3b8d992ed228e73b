"""JSON run configuration mapped onto the module dataclasses."""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .pipeline import PipelineConfig
from .simulate import SimulationConfig
from .tuning import TuneConfig


@dataclass
class ReplicateConfig:
    scenarios: tuple[str, ...] = ("alpha",)
    models: tuple[str, ...] = ("cl", "cox", "gbm")
    replications: int = 5
    seed: int = 1


@dataclass
class RunConfig:
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    tune: TuneConfig = field(default_factory=TuneConfig)
    replicate: ReplicateConfig = field(default_factory=ReplicateConfig)
    schema: dict | None = None  # column roles for external claim files


def _field_default(f: dataclasses.Field):
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    if f.default is not dataclasses.MISSING:
        return f.default
    return None


def build(cls, data: dict | None, base=None):
    """Instantiate dataclass ``cls`` from a plain dict, recursing into nested configs.

    Keys missing from ``data`` keep the values of ``base`` (or the class defaults),
    so a partial nested block only overrides what it names.
    """
    if data is None:
        return base if base is not None else cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} expects an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        tp = hints[name]
        if dataclasses.is_dataclass(tp):
            inner = getattr(base, name) if base is not None else _field_default(fields[name])
            kwargs[name] = build(tp, value, inner)
        elif typing.get_origin(tp) is tuple and isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return dataclasses.replace(base, **kwargs) if base is not None else cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return build(RunConfig, data)


def to_plain(obj):
    """Dataclass tree to JSON-ready values."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    return obj
