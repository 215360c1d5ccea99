import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ovavss.errors import ConfigurationError


class Settings(BaseSettings):
    """Process-wide settings pulled from OVAVSS_* environment variables or .env."""

    log: Literal["error", "info", "debug"] = "info"
    data_root: Path = Path("data")
    # concurrency of dataset writing and evaluation sharding
    workers: int = 4

    model_config = SettingsConfigDict(
        env_prefix="OVAVSS_", env_file=".env", env_file_encoding="utf-8"
    )

    @property
    def log_level(self) -> int:
        return getattr(logging, self.log.upper())


@lru_cache()
def get_settings() -> Settings:  # pragma: no cover
    return Settings()


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class RosterEntry(_Frozen):
    name: str
    shape_kind: Literal["circle", "square", "triangle", "cross", "ring", "bar"]
    split: Literal["base", "novel"]


# 6 base / 4 novel, every shape kind used at least once across the roster
DEFAULT_ROSTER: tuple[RosterEntry, ...] = (
    RosterEntry(name="drum", shape_kind="circle", split="base"),
    RosterEntry(name="violin", shape_kind="triangle", split="base"),
    RosterEntry(name="guitar", shape_kind="bar", split="base"),
    RosterEntry(name="piano", shape_kind="square", split="base"),
    RosterEntry(name="dog", shape_kind="cross", split="base"),
    RosterEntry(name="car", shape_kind="ring", split="base"),
    RosterEntry(name="trumpet", shape_kind="triangle", split="novel"),
    RosterEntry(name="cat", shape_kind="circle", split="novel"),
    RosterEntry(name="siren", shape_kind="ring", split="novel"),
    RosterEntry(name="flute", shape_kind="bar", split="novel"),
)


class DataConfig(_Frozen):
    root: Path = Path("data")
    n_train: int = 300
    n_val: int = 60
    n_test: int = 60
    height: int = 64
    width: int = 64
    frames: int = 5
    seed: int = 42
    roster: tuple[RosterEntry, ...] = DEFAULT_ROSTER

    @model_validator(mode="after")
    def _check(self) -> "DataConfig":
        if self.height % 32 or self.width % 32:
            raise ValueError(
                f"H and W must be multiples of 32 (pyramid divisibility), got {self.height}x{self.width}"
            )
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ValueError("n_train, n_val and n_test must be >= 1")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        names = [c.name for c in self.roster]
        if len(set(names)) != len(names):
            raise ValueError("roster class names must be unique")
        if not any(c.split == "base" for c in self.roster):
            raise ValueError("roster needs at least one base class")
        return self


class ModelConfig(_Frozen):
    num_queries: int = 20
    num_layers: int = 6
    c_av: int = 128
    c_o: int = 128
    c_e: int = 128
    audio_dim: int = 128
    visual_widths: tuple[int, int, int, int] = (32, 64, 128, 128)
    stem_width: int = 16
    groups: int = 8
    fusion_heads: int = 1
    decoder_heads: int = 8
    ffn_dim: int = 256
    max_frames: int = 5
    masked_attention: bool = False

    @model_validator(mode="after")
    def _check(self) -> "ModelConfig":
        if self.c_o != self.c_e:
            raise ValueError(f"C_o ({self.c_o}) must equal C_e ({self.c_e}) for the mask dot product")
        if self.c_av % self.fusion_heads:
            raise ValueError(f"C_av={self.c_av} is not divisible by fusion_heads={self.fusion_heads}")
        if self.c_o % self.decoder_heads:
            raise ValueError(f"C_o={self.c_o} is not divisible by decoder_heads={self.decoder_heads}")
        widths = (self.stem_width, *self.visual_widths, self.c_av, self.c_e)
        if any(w % self.groups for w in widths):
            raise ValueError(f"channel widths {widths} must all be divisible by groups={self.groups}")
        return self


class LossConfig(_Frozen):
    ce: float = 2.0
    focal: float = 5.0
    dice: float = 5.0
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0


class OptimConfig(_Frozen):
    lr: float = 1e-4
    weight_decay: float = 0.05
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 10
    decay_at: float = 0.88
    decay_factor: float = 0.1
    checkpoint_every: int = 1


class AblationConfig(_Frozen):
    fusion: Literal["none", "add", "bi_attn"] = "bi_attn"
    multi_level: bool = True
    audio_prompt: Literal["none", "concat_add", "cross_attn", "audiomaskdec"] = "audiomaskdec"
    crop: Literal["none", "crop_resize", "square_crop"] = "square_crop"
    top_down: bool = True


class ClassifierConfig(_Frozen):
    provider: Literal["toy", "file"] = "toy"
    embedding_file: Path | None = None
    temperature: float = 100.0
    crop_size: int = 32
    embed_dim: int = 64
    encoder_seed: int = 1234
    # render-variation seeds standing in for prompt templates
    views: tuple[int, ...] = (0, 1, 2, 3, 4)


class ThresholdConfig(_Frozen):
    sounding: float = 0.5
    mask: float = 0.5


class RunConfig(_Frozen):
    seed: int = 0
    run_dir: Path = Path("runs/default")
    data: DataConfig = DataConfig()
    model: ModelConfig = ModelConfig()
    loss: LossConfig = LossConfig()
    optim: OptimConfig = OptimConfig()
    ablation: AblationConfig = AblationConfig()
    classifier: ClassifierConfig = ClassifierConfig()
    thresholds: ThresholdConfig = ThresholdConfig()

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if self.data.frames > self.model.max_frames:
            raise ValueError(
                f"data.frames={self.data.frames} exceeds model.max_frames={self.model.max_frames}"
            )
        return self


def _validated(model_cls, payload):
    try:
        return model_cls.model_validate(payload)
    except ValidationError as e:
        raise ConfigurationError(str(e)) from e


def load_run_config(path: Path | None) -> RunConfig:
    """Read a RunConfig from JSON; None yields the defaults."""
    if path is None:
        return RunConfig()
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    return _validated(RunConfig, payload)


def with_overrides(cfg: RunConfig, **sections) -> RunConfig:
    """Return a copy of cfg with nested fields replaced, re-validated.

    `with_overrides(cfg, seed=3, data={"root": "x"})` merges dict values into the
    existing section instead of replacing it wholesale.
    """
    payload = cfg.model_dump()
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(payload.get(key), dict):
            payload[key] = {**payload[key], **value}
        else:
            payload[key] = value
    return _validated(RunConfig, payload)


def apply_ablations(cfg: RunConfig, pairs: list[str]) -> RunConfig:
    """Apply repeatable `key=value` ablation flags."""
    updates: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigurationError(f"ablation flag must look like key=value, got {pair!r}")
        if key not in AblationConfig.model_fields:
            raise ConfigurationError(
                f"unknown ablation {key!r}; expected one of {sorted(AblationConfig.model_fields)}"
            )
        updates[key] = value
    return with_overrides(cfg, ablation=updates) if updates else cfg
