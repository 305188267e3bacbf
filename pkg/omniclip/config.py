# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

""" """

from __future__ import annotations

import dataclasses
import json
import logging
import math
import typing as ty
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import validators
from .validators import ConfigError

_LOG = logging.getLogger(__name__)


@dataclass
class ModelConfig:
    seed: int = 0

    depth: int = 4
    width: int = 64
    heads: int = 4
    patch_size: int = 8
    image_size: int = 32
    channels: int = 3
    frames: int = 8
    out_dim: int = 32
    agg_heads: int = 4
    text_layers: int = 2
    ln_eps: float = 1e-5

    pta_enabled: bool = True
    pta_ratio: float = 0.25
    # bitmask over blocks; None = every block
    pta_layers: int | None = None
    pta_heads: int | None = None
    pta_exclude_cls: bool = False
    alpha_init: float = 0.0

    spg_enabled: bool = True
    spg_pooling: str = "avg"
    spg_projector: bool = True
    spg_per_layer: bool = False

    variant: str = "block_parallel"

    temperature: float = 0.07
    trainable_temperature: bool = False
    # False: softmax over raw cosine similarities
    scaled_logits: bool = True

    trainable_te: bool = False
    dtype: str = "float64"

    def __post_init__(self) -> None:
        validators.validate_model(self)

    @classmethod
    def vit_b16(cls: type[ModelConfig], **kwargs: ty.Any) -> ModelConfig:
        base: dict[str, ty.Any] = {
            "depth": 12,
            "width": 768,
            "heads": 12,
            "patch_size": 16,
            "image_size": 224,
            "frames": 8,
            "out_dim": 512,
            "agg_heads": 8,
        }
        base.update(kwargs)
        return cls(**base)

    @property
    def grid_side(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_side * self.grid_side

    @property
    def num_prompts(self) -> int:
        return self.num_patches // 4 if self.spg_enabled else 0

    @property
    def num_tokens(self) -> int:
        return 1 + self.num_patches + self.num_prompts

    @property
    def bottleneck(self) -> int:
        return int(self.width * self.pta_ratio)

    @property
    def bottleneck_heads(self) -> int:
        """Heads of the adapter attention; divides the bottleneck width."""
        bdim = self.bottleneck
        heads = self.pta_heads or self.heads

        heads = min(heads, bdim)
        while bdim % heads:
            heads -= 1

        return heads

    def adapted_blocks(self) -> list[int]:
        if not self.pta_enabled:
            return []

        mask = (1 << self.depth) - 1 if self.pta_layers is None else self.pta_layers
        return [idx for idx in range(self.depth) if mask & (1 << idx)]

    @property
    def np_dtype(self) -> np.dtype[ty.Any]:
        return np.dtype(self.dtype)

    def replace(self, **changes: ty.Any) -> ModelConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, ty.Any]:
        return dataclasses.asdict(self)


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    peak_lr: float = 2e-3
    min_lr: float = 2e-5
    warmup_epochs: int = 5
    weight_decay: float = 0.003
    betas: tuple[float, float] = (0.9, 0.98)
    adam_eps: float = 1e-8
    label_smoothing: float = 0.1
    seed: int = 0
    # stop after this many optimizer steps (schedule still uses epochs)
    max_steps: int | None = None

    def __post_init__(self) -> None:
        self.betas = (float(self.betas[0]), float(self.betas[1]))
        validators.validate_train(self)

    def replace(self, **changes: ty.Any) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, ty.Any]:
        res = dataclasses.asdict(self)
        res["betas"] = list(self.betas)
        return res


@dataclass
class DataConfig:
    label_map: str = "motion_only"
    n_per_class: int = 128
    val_fraction: float = 0.25
    test_fraction: float = 0.25
    speed: float = 1.0
    scale_rate: float = 0.5
    noise: float = 0.05
    seed: int = 0
    held_out: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        validators.validate_data(self)

    def replace(self, **changes: ty.Any) -> DataConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, ty.Any]:
        return dataclasses.asdict(self)


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def with_seed(self, seed: int) -> RunConfig:
        return RunConfig(
            model=self.model.replace(seed=seed),
            train=self.train.replace(seed=seed),
            data=self.data.replace(seed=seed),
        )

    def to_dict(self) -> dict[str, ty.Any]:
        return {
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "data": self.data.to_dict(),
        }


_T = ty.TypeVar("_T")


def from_dict(cls: type[_T], data: dict[str, ty.Any], section: str) -> _T:
    known = {f.name for f in dataclasses.fields(cls)}  # type: ignore
    if unknown := set(data) - known:
        raise ConfigError(section, sorted(unknown), "unknown keys")

    values = dict(data)
    if "betas" in values:
        values["betas"] = tuple(values["betas"])

    return cls(**values)


def model_config_from_dict(data: dict[str, ty.Any]) -> ModelConfig:
    return from_dict(ModelConfig, data, "model")


def load(file: Path) -> RunConfig:
    _LOG.info("loading %s", file)
    with file.open(encoding="utf-8") as fin:
        try:
            doc = json.load(fin)
        except json.JSONDecodeError as exc:
            raise ConfigError(str(file), exc.msg, "invalid json") from exc

    if not isinstance(doc, dict):
        raise ConfigError(str(file), type(doc).__name__, "expected object")

    if unknown := set(doc) - {"model", "train", "data"}:
        raise ConfigError(str(file), sorted(unknown), "unknown sections")

    cfg = RunConfig(
        model=from_dict(ModelConfig, doc.get("model", {}), "model"),
        train=from_dict(TrainConfig, doc.get("train", {}), "train"),
        data=from_dict(DataConfig, doc.get("data", {}), "data"),
    )
    _LOG.debug("config %r", cfg)
    return cfg


def save(file: Path, cfg: RunConfig) -> None:
    _LOG.info("saving %s", file)
    file.parent.mkdir(parents=True, exist_ok=True)
    with file.open("w", encoding="utf-8") as fout:
        json.dump(cfg.to_dict(), fout, indent=2, sort_keys=True)


def ratio_label(ratio: float) -> str:
    """1/4 for 0.25 and so on; plain float when not a unit fraction."""
    inv = 1 / ratio
    if math.isclose(inv, round(inv)):
        return "1" if round(inv) == 1 else f"1/{round(inv)}"

    return f"{ratio:g}"
