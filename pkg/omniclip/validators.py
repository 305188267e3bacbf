# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

""" """

from __future__ import annotations

import math
import typing as ty

from . import consts

if ty.TYPE_CHECKING:
    from .config import DataConfig, ModelConfig, TrainConfig


class ConfigError(ValueError):
    def __init__(self, field_name: str, value: object, reason: str = "") -> None:
        self.field = field_name
        self.value = value
        self.reason = reason

    def __str__(self) -> str:
        res = f"invalid value in {self.field}: {self.value!r}"
        return f"{res} ({self.reason})" if self.reason else res


def validate_choice(name: str, value: str, choices: ty.Sequence[str]) -> None:
    if value not in choices:
        raise ConfigError(name, value, f"expected one of {', '.join(choices)}")


def validate_positive(name: str, value: float) -> None:
    if not value > 0:
        raise ConfigError(name, value, "must be positive")


def validate_ratio(ratio: float) -> None:
    if not 0 < ratio <= 1:
        raise ConfigError("pta_ratio", ratio, "must be in (0, 1]")


def validate_patch_grid(image_size: int, patch_size: int) -> None:
    if image_size % patch_size:
        raise ConfigError(
            "patch_size", patch_size, f"does not divide image {image_size}"
        )


def validate_prompt_grid(num_patches: int) -> None:
    side = math.isqrt(num_patches)
    if side * side != num_patches or side % 2:
        raise ConfigError(
            "num_patches", num_patches, "needs square grid with even side"
        )


def validate_model(cfg: ModelConfig) -> None:
    for name in ("depth", "width", "heads", "patch_size", "image_size"):
        validate_positive(name, getattr(cfg, name))

    validate_positive("frames", cfg.frames)
    validate_positive("out_dim", cfg.out_dim)
    validate_positive("temperature", cfg.temperature)
    if cfg.width % cfg.heads:
        raise ConfigError("heads", cfg.heads, f"does not divide {cfg.width}")

    if cfg.out_dim % cfg.agg_heads:
        raise ConfigError(
            "agg_heads", cfg.agg_heads, f"does not divide {cfg.out_dim}"
        )

    validate_patch_grid(cfg.image_size, cfg.patch_size)
    validate_ratio(cfg.pta_ratio)
    validate_choice("variant", cfg.variant, consts.VARIANTS)
    validate_choice("spg_pooling", cfg.spg_pooling, consts.POOLING_MODES)
    validate_choice("dtype", cfg.dtype, ("float64", "float32"))
    if cfg.spg_enabled:
        validate_prompt_grid(cfg.num_patches)

    if cfg.pta_layers is not None and not 0 <= cfg.pta_layers < (
        1 << cfg.depth
    ):
        raise ConfigError("pta_layers", cfg.pta_layers, "mask out of range")

    if cfg.pta_enabled and cfg.bottleneck < 1:
        raise ConfigError("pta_ratio", cfg.pta_ratio, "empty bottleneck")


def validate_train(cfg: TrainConfig) -> None:
    if cfg.epochs < 0:
        raise ConfigError("epochs", cfg.epochs)

    validate_positive("batch_size", cfg.batch_size)
    validate_positive("peak_lr", cfg.peak_lr)
    if not 0 <= cfg.min_lr <= cfg.peak_lr:
        raise ConfigError("min_lr", cfg.min_lr, "must be in [0, peak_lr]")

    if cfg.epochs and not 0 <= cfg.warmup_epochs < cfg.epochs:
        raise ConfigError("warmup_epochs", cfg.warmup_epochs, "must be < epochs")

    if not 0 <= cfg.label_smoothing < 1:
        raise ConfigError("label_smoothing", cfg.label_smoothing)

    if cfg.weight_decay < 0:
        raise ConfigError("weight_decay", cfg.weight_decay)


def validate_data(cfg: DataConfig) -> None:
    validate_choice("label_map", cfg.label_map, consts.LABEL_MAPS)
    validate_positive("n_per_class", cfg.n_per_class)
    if not 0 <= cfg.val_fraction + cfg.test_fraction < 1:
        raise ConfigError("test_fraction", cfg.test_fraction)

    if cfg.noise < 0:
        raise ConfigError("noise", cfg.noise)
