"""Pipeline configuration.

Every section rejects unknown keys. ``load_config`` reads a TOML file and
turns validation failures into :class:`ConfigError`.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Literal

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from Src.common.errors import ConfigError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeneratorConfig(_Section):
    n_items: PositiveInt = 5000
    n_queries: PositiveInt = 500
    n_users: PositiveInt = 200
    n_contexts: PositiveInt = 4
    n_categories: PositiveInt = 5
    d_latent: PositiveInt = 16
    d_obs: PositiveInt = 48
    sigma_obs: float = Field(0.05, ge=0.0)
    style_spread: PositiveFloat = 0.35
    max_category_cosine: float = Field(0.3, gt=-1.0, lt=1.0)
    query_noise: float = Field(0.15, ge=0.0)
    pareto_shape: PositiveFloat = 1.5
    popularity_floor: PositiveFloat = 1e-3
    slots_per_query: PositiveInt = 20
    sessions_per_query: PositiveInt = 4
    n_days: PositiveInt = 5
    relevance_gain: float = 4.0
    click_bias: float = -3.0
    position_decay: float = Field(0.9, gt=0.0, le=1.0)
    exposure_relevance_power: float = Field(2.0, ge=0.0)
    relevance_threshold: float = Field(0.85, gt=0.0, lt=1.0)
    identity_lift: bool = False
    seed: int = Field(0, ge=0)


class AugmentationConfig(_Section):
    mask_fraction: float = Field(0.2, ge=0.0, le=1.0)
    jitter_sigma: float = Field(0.1, ge=0.0)
    grey_prob: float = Field(0.2, ge=0.0, le=1.0)
    flip_prob: float = Field(0.5, ge=0.0, le=1.0)
    flip_fraction: float = Field(0.1, ge=0.0, le=1.0)
    channels: PositiveInt = 3

    @model_validator(mode="after")
    def _one_active(self) -> "AugmentationConfig":
        active = (
            self.mask_fraction > 0
            or self.jitter_sigma > 0
            or self.grey_prob > 0
            or (self.flip_prob > 0 and self.flip_fraction > 0)
        )
        if not active:
            raise ValueError("at least one augmentation must be active")
        return self

    @classmethod
    def identity(cls) -> "AugmentationConfig":
        """All augmentations off; bypasses the at-least-one check."""
        return cls.model_construct(
            mask_fraction=0.0,
            jitter_sigma=0.0,
            grey_prob=0.0,
            flip_prob=0.0,
            flip_fraction=0.0,
            channels=3,
        )


class EncoderConfig(_Section):
    embedding_dim: PositiveInt = 32
    hidden_sizes: list[PositiveInt] = Field(default_factory=lambda: [64])
    temperature: PositiveFloat = 1.0
    include_anchor_in_denominator: bool = False


class StageTrainingConfig(_Section):
    epochs: int = Field(5, ge=0)
    batch_size: PositiveInt = 64
    learning_rate: PositiveFloat = 0.05
    epsilon: PositiveFloat = 1e-10
    negatives_per_pair: PositiveInt = 31


class DebiasConfig(_Section):
    top_k: PositiveInt = 15
    non_displayed_threshold: int = Field(1, ge=0)
    hidden_sizes: list[PositiveInt] = Field(default_factory=lambda: [128, 16, 128])
    activations: list[Literal["relu", "tanh", "sigmoid", "linear"]] = Field(
        default_factory=lambda: ["relu", "tanh", "relu"]
    )
    gate_mode: Literal["vector", "scalar"] = "vector"
    gate_bias: bool = False
    loss_weight: float = Field(1.0, ge=0.0)
    temperature: PositiveFloat = 1.0
    similarity_floor: PositiveFloat = 1e-6
    max_skip_rate: float = Field(0.5, gt=0.0, le=1.0)
    include_anchor_in_denominator: bool = False

    @model_validator(mode="after")
    def _activations_match(self) -> "DebiasConfig":
        if len(self.activations) != len(self.hidden_sizes):
            raise ValueError("debias.activations must match debias.hidden_sizes")
        return self


class CtrConfig(_Section):
    tower_sizes: list[PositiveInt] = Field(default_factory=lambda: [64, 32, 16])
    embedding_width: PositiveInt = 8
    epochs: int = Field(5, ge=0)
    batch_size: int = Field(128, ge=2)
    learning_rate: PositiveFloat = 0.05
    epsilon: PositiveFloat = 1e-10
    test_days: PositiveInt = 1


class EvalConfig(_Section):
    k_values: list[PositiveInt] = Field(default_factory=lambda: [10, 100])
    low_impression_threshold: int = Field(5, ge=0)
    bucket_fraction: float = Field(0.1, gt=0.0, le=1.0)


class PipelineConfig(_Section):
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    classifier: StageTrainingConfig = Field(default_factory=StageTrainingConfig)
    s1: StageTrainingConfig = Field(default_factory=StageTrainingConfig)
    s2: StageTrainingConfig = Field(default_factory=StageTrainingConfig)
    debias: DebiasConfig = Field(default_factory=DebiasConfig)
    ctr: CtrConfig = Field(default_factory=CtrConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    seed: int = Field(0, ge=0)
    output_dir: Path = Path("runs")

    @model_validator(mode="before")
    @classmethod
    def _generator_seed_from_root(cls, data: Any) -> Any:
        if isinstance(data, dict):
            generator = dict(data.get("generator") or {})
            generator.setdefault("seed", data.get("seed", 0))
            data = {**data, "generator": generator}
        return data

    @model_validator(mode="after")
    def _test_split(self) -> "PipelineConfig":
        if self.ctr.test_days >= self.generator.n_days:
            raise ValueError("ctr.test_days must leave at least one training day")
        return self

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        output_dir: Path | None = None,
    ) -> "PipelineConfig":
        updates: dict[str, Any] = {}
        if seed is not None:
            updates["seed"] = seed
            updates["generator"] = self.generator.model_copy(update={"seed": seed})
        if output_dir is not None:
            updates["output_dir"] = Path(output_dir)
        return self.model_copy(update=updates) if updates else self


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ()))
        parts.append(f"{loc or '<root>'}: {err.get('msg')}")
    return "; ".join(parts)


def config_from_mapping(payload: dict[str, Any]) -> PipelineConfig:
    try:
        return PipelineConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(
            f"invalid configuration: {_format_validation_error(exc)}"
        ) from exc


def load_config(
    path: Path | None = None,
    *,
    seed: int | None = None,
    output_dir: Path | None = None,
) -> PipelineConfig:
    """Load a TOML config (or the defaults) and apply CLI overrides."""
    payload: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with path.open("rb") as fh:
                payload = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    cfg = config_from_mapping(payload)
    try:
        return cfg.with_overrides(seed=seed, output_dir=output_dir)
    except ValidationError as exc:
        raise ConfigError(
            f"invalid override: {_format_validation_error(exc)}"
        ) from exc


def dump_resolved(cfg: PipelineConfig, directory: Path) -> Path:
    """Write the resolved config beside a command's outputs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / "config.resolved.json"
    target.write_text(cfg.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return target


__all__ = [
    "GeneratorConfig",
    "AugmentationConfig",
    "EncoderConfig",
    "StageTrainingConfig",
    "DebiasConfig",
    "CtrConfig",
    "EvalConfig",
    "PipelineConfig",
    "config_from_mapping",
    "load_config",
    "dump_resolved",
]
