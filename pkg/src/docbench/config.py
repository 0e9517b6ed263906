"""Run configuration: one JSON file, every key documented here, unknown keys rejected."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

from .ddas import WeightParams
from .mgam import MgamLimits

CONFIG_ENV = "DOCBENCH_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    text: float = 0.95
    formula: float = 0.90
    table: float = 0.90

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"thresholds.{f.name}={v} must lie in (0, 1)")


@dataclass(frozen=True)
class SamplingConfig:
    k: int = 8
    seed: int = 0
    max_iter: int = 100
    tol: float = 1e-4
    weights: WeightParams = field(default_factory=WeightParams)

    def __post_init__(self):
        if self.k < 1 or self.max_iter < 1 or self.tol <= 0:
            raise ConfigError("sampling.k and sampling.max_iter must be positive, sampling.tol > 0")
        w = self.weights
        if w.alpha < 0 or min(w.beta_easy, w.beta_medium, w.beta_hard) <= 0 or not 0 <= w.gamma <= 1:
            raise ConfigError("sampling.weights: alpha >= 0, betas > 0, gamma in [0, 1]")
        if w.entropy_bonus < 0:
            raise ConfigError("sampling.weights.entropy_bonus must be >= 0")


@dataclass(frozen=True)
class ReportConfig:
    model_name: str = "model"
    jobs: int = 1
    markdown: bool = True

    def __post_init__(self):
        if self.jobs < 1:
            raise ConfigError("report.jobs must be >= 1")


@dataclass(frozen=True)
class Config:
    thresholds: Thresholds = field(default_factory=Thresholds)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    matching: MgamLimits = field(default_factory=MgamLimits)
    report: ReportConfig = field(default_factory=ReportConfig)
    header_repeat_threshold: float = 0.9

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key(s) at {path or 'top level'}: {unknown}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        sub = f"{path}.{name}" if path else name
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, sub)
        else:
            kwargs[name] = value
    try:
        return replace(defaults, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path or 'config'}: {e}") from None


def config_from_dict(data: dict) -> Config:
    return _build(Config, data, "")


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Read the config file; ``$DOCBENCH_CONFIG`` supplies the path when none is given."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return Config()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return config_from_dict(data)
