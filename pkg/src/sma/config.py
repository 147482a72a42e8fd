"""Run configuration: one JSON file with full defaulting, overridable by flags.

Every table row is reproducible from a single config artifact. Unknown keys
are rejected so typos fail loudly instead of silently using a default.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .model import DEFAULT_BLOCKS, DEFAULT_STEM
from .risk import RiskMatrix


class ConfigError(Exception):
    """Unreadable or invalid run configuration."""


MODES = ("identification", "generalized", "personalized")


@dataclass(frozen=True)
class Config:
    data_root: str | None = None
    out_dir: str = "out"
    window_s: float = 5.0
    stride_s: float = 2.5
    decimation: int = 10
    task: str = "emotion4"
    mode: str = "personalized"
    modalities: tuple[str, ...] | None = None
    k: int = 10
    jobs: int = 1
    seed: int = 42
    stem: tuple[int, int, int] = DEFAULT_STEM
    blocks: tuple[tuple[int, int, int], ...] = DEFAULT_BLOCKS
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 30
    risk: RiskMatrix = field(default_factory=RiskMatrix)

    def __post_init__(self):
        if self.window_s <= 0 or self.stride_s <= 0:
            raise ConfigError("window_s and stride_s must be positive")
        if self.decimation < 1 or self.k < 2 or self.jobs < 1:
            raise ConfigError("decimation >= 1, k >= 2 and jobs >= 1 required")
        if self.task not in ("identification", "emotion4", "stress_binary"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.epochs < 0 or self.lr <= 0 or self.batch_size < 1:
            raise ConfigError("bad training hyperparameters")
        if self.modalities is not None:
            object.__setattr__(self, "modalities", tuple(self.modalities))

    def resolved_data_root(self) -> Path | None:
        env = os.environ.get("SMA_DATA")
        root = env if env else self.data_root
        return Path(root) if root else None


def _coerce(name: str, raw, default):
    if name == "risk":
        if not isinstance(raw, dict):
            raise ConfigError("risk must be an object with 'table' and/or 'thresholds'")
        return RiskMatrix.from_dict(raw)
    if name == "modalities":
        return None if raw is None else tuple(str(m) for m in raw)
    if name == "stem":
        return tuple(int(v) for v in raw)
    if name == "blocks":
        return tuple(tuple(int(v) for v in b) for b in raw)
    if isinstance(default, bool):
        return bool(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def load_config(path=None, overrides: dict | None = None) -> Config:
    """Read a JSON config (all keys optional) and apply flag overrides on top."""
    values: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        values.update(raw)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    known = {f.name: f for f in fields(Config)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    defaults = Config()
    kwargs = {}
    for name, raw in values.items():
        try:
            kwargs[name] = _coerce(name, raw, getattr(defaults, name))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name!r}: {exc}") from exc
    try:
        return Config(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
