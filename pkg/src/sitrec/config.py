"""Training configuration: nested dataclasses loaded from YAML plus ``key=value`` overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .heads import RoleHeadConfig, VerbHeadConfig
from .srl import LocalizerConfig, MlpConfig, TfConfig, XtfConfig
from .video import DecoderConfig, VideoConfig

MODELS = ("verb", "role", "mlp", "tf", "xtf", "stack", "video")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    model: str = "xtf"
    provider: str = "synthetic"
    d: int = 512  # synthetic embedding width
    provider_seed: int = 0
    provider_noise: float = 0.1
    batch_size: int = 64
    lr: float = 1e-3
    optimizer: str = "adamax"
    gamma: float = 0.95
    epochs: int = 20
    verb_epochs: Optional[int] = None
    role_epochs: int = 1
    seed: int = 0
    loss: str = "maxe"  # maxe | ce
    localize: bool = True
    noun_model: str = "xtf"  # used by the "stack" model
    verb: VerbHeadConfig = field(default_factory=VerbHeadConfig)
    role: RoleHeadConfig = field(default_factory=RoleHeadConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    tf: TfConfig = field(default_factory=TfConfig)
    xtf: XtfConfig = field(default_factory=XtfConfig)
    localizer: LocalizerConfig = field(default_factory=LocalizerConfig)
    video: VideoConfig = field(default_factory=VideoConfig)
    video_min_freq: int = 1
    per_event: bool = False
    video_gt_verbs: bool = True

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.loss not in ("maxe", "ce"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.optimizer not in ("adamax", "adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        for name in ("batch_size", "lr", "gamma", "epochs"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def desk_config(**overrides) -> TrainConfig:
    """Small widths that train on CPU in seconds to minutes."""
    base = TrainConfig(
        d=256,
        verb=VerbHeadConfig(hidden_dim=256),
        role=RoleHeadConfig(hidden_dim=256),
        mlp=MlpConfig(blocks=2, hidden_dim=512),
        tf=TfConfig(layers=2, heads=8, token_dim=128, ff_dim=256),
        xtf=XtfConfig(layers=2, heads=1, query_dim=128, ff_dim=256),
        localizer=LocalizerConfig(hidden_dim=128),
        video=VideoConfig(hidden_dim=128, ff_dim=256, decoder=DecoderConfig(dim=128, heads=8, layers=3, ff_dim=256)),
    )
    return merge(base, overrides) if overrides else base


def _build(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping for {cls.__name__}, got {data!r}")
    kwargs = {}
    hints = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in hints:
            raise ConfigError(f"unknown config key {key!r} for {cls.__name__}")
        default = getattr(cls(), key) if _has_defaults(cls) else None
        if dataclasses.is_dataclass(default):
            if not isinstance(value, dict):
                raise ConfigError(f"expected a mapping for {key!r}, got {value!r}")
            value = _build(type(default), {**dataclasses.asdict(default), **value})
        elif isinstance(default, float) and isinstance(value, (str, int)) and not isinstance(value, bool):
            # YAML reads exponents without a dot ("5e-4") as strings
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(f"{key!r} must be a number, got {value!r}") from None
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def _has_defaults(cls) -> bool:
    return all(f.default is not dataclasses.MISSING or f.default_factory is not dataclasses.MISSING for f in dataclasses.fields(cls))


def merge(config: TrainConfig, overrides: dict) -> TrainConfig:
    """Deep-merge a nested mapping into a config."""

    def deep(base: dict, upd: dict) -> dict:
        out = dict(base)
        for k, v in upd.items():
            if isinstance(v, dict) and isinstance(out.get(k), dict):
                out[k] = deep(out[k], v)
            else:
                out[k] = v
        return out

    return from_dict(deep(config.to_dict(), overrides))


def from_dict(data: dict) -> TrainConfig:
    return _build(TrainConfig, data)


def parse_overrides(items) -> dict:
    """``["xtf.layers=2", "lr=0.01"]`` -> nested dict with YAML-typed values."""
    out: dict[str, Any] = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        node = out
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = yaml.safe_load(raw)
    return out


def load_config(path=None, overrides=None, desk: bool = False) -> TrainConfig:
    config = desk_config() if desk else TrainConfig()
    if path is not None:
        data = yaml.safe_load(Path(path).read_text()) or {}
        config = merge(config, data)
    if overrides:
        config = merge(config, overrides)
    return config
