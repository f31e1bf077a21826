"""Run configuration: one YAML file, schema-checked, unknown keys rejected."""
from __future__ import annotations

import dataclasses
import typing
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, create_model

from .audiofe import StftConfig
from .evaluate import EvalConfig
from .geometry import MatcherConfig, RansacConfig
from .nets import AudioUNetConfig, VisualEncoderConfig
from .objective import ObjectnessConfig
from .synthgen import SceneConfig

_STRICT = ConfigDict(extra="forbid")


def _section(dc) -> type[BaseModel]:
    """Pydantic mirror of a config dataclass (same fields and defaults)."""
    hints = typing.get_type_hints(dc)
    fields = {}
    for f in dataclasses.fields(dc):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        fields[f.name] = (hints[f.name], default)
    return create_model(f"{dc.__name__}Section", __config__=_STRICT, **fields)


SceneSection = _section(SceneConfig)
StftSection = _section(StftConfig)
VisualSection = _section(VisualEncoderConfig)
AudioSection = _section(AudioUNetConfig)
MatcherSection = _section(MatcherConfig)
RansacSection = _section(RansacConfig)
ObjectnessSection = _section(ObjectnessConfig)
EvalSection = _section(EvalConfig)


class ModelSection(BaseModel):
    model_config = _STRICT
    temporal: Literal["gatm", "max", "avg", "none"] = "gatm"
    soft_localization: bool = True
    disentangle: bool = True


class TrainSection(BaseModel):
    model_config = _STRICT
    epochs: int = Field(20, ge=1)
    batch_size: int = Field(16, ge=2)
    lr_visual: float = Field(1e-4, ge=0)
    lr_audio: float = Field(1e-2, ge=0)
    mixing: bool = True
    homographies: Literal["estimated", "ground_truth", "identity"] = "estimated"
    weight_decay: float = Field(0.0, ge=0)


class DataSection(BaseModel):
    model_config = _STRICT
    n_clips: int = Field(200, ge=1)
    base_seed: int = 0


class RunConfig(BaseModel):
    model_config = _STRICT
    seed: int = 0
    data: DataSection = DataSection()
    scene: SceneSection = SceneSection()
    stft: StftSection = StftSection()
    visual: VisualSection = VisualSection()
    audio: AudioSection = AudioSection()
    model: ModelSection = ModelSection()
    matcher: MatcherSection = MatcherSection()
    ransac: RansacSection = RansacSection()
    objectness: ObjectnessSection = ObjectnessSection()
    train: TrainSection = TrainSection()
    eval: EvalSection = EvalSection()

    # dataclass views used by the library code
    def scene_config(self) -> SceneConfig:
        return SceneConfig(**self.scene.model_dump())

    def stft_config(self) -> StftConfig:
        return StftConfig(**self.stft.model_dump())

    def network_config(self):
        from .model import ModelConfig
        return ModelConfig(visual=VisualEncoderConfig(**self.visual.model_dump()),
                           audio=AudioUNetConfig(**self.audio.model_dump()),
                           **self.model.model_dump())

    def matcher_config(self) -> MatcherConfig:
        return MatcherConfig(**self.matcher.model_dump())

    def ransac_config(self) -> RansacConfig:
        return RansacConfig(**self.ransac.model_dump())

    def objectness_config(self) -> ObjectnessConfig:
        return ObjectnessConfig(**self.objectness.model_dump())

    def eval_config(self) -> EvalConfig:
        return EvalConfig(**self.eval.model_dump())


class ConfigError(ValueError):
    pass


def _set_path(d: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError(f"{dotted}: {k} is not a section")
    cur[keys[-1]] = value


def parse_config(raw: dict | None, overrides: list[str] | tuple = ()) -> RunConfig:
    """Validate a config mapping; overrides are 'section.field=value' with YAML values."""
    data = dict(raw or {})
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        _set_path(data, key.strip(), yaml.safe_load(value))
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        msgs = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs)) from None


def load_config(path: str | Path | None, overrides=()) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    cfg = parse_config(raw, overrides)
    try:  # dataclass-level invariants
        cfg.scene_config(), cfg.stft_config(), cfg.network_config(), cfg.ransac_config()
        cfg.objectness_config(), cfg.eval_config()
    except ValueError as e:
        raise ConfigError(f"invalid config: {e}") from None
    return cfg


def dump_config(cfg: RunConfig, path: str | Path):
    Path(path).write_text(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False))
