# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Analytic FLOP and parameter accounting.

Counting convention: a linear layer on n tokens costs 2*n*in*out FLOPs;
self-attention over n tokens of width d costs four projections plus
2*n*n*d for QK^T and another 2*n*n*d for AV. Normalisations, softmax,
activations, pooling and residual additions are not counted. FLOPs are
per clip (one view of T frames).
"""

from __future__ import annotations

import typing as ty
from dataclasses import dataclass, field

from .model.text import MAX_TOKENS, Vocabulary, default_corpus

if ty.TYPE_CHECKING:
    from .config import ModelConfig


def linear_flops(tokens: int, fan_in: int, fan_out: int) -> int:
    return 2 * tokens * fan_in * fan_out


def attention_flops(tokens: int, dim: int) -> int:
    """Q, K, V, O projections plus the QK^T and AV products."""
    return 4 * linear_flops(tokens, dim, dim) + 4 * tokens * tokens * dim


def linear_params(fan_in: int, fan_out: int, *, bias: bool = True) -> int:
    return fan_in * fan_out + (fan_out if bias else 0)


def attention_params(dim: int) -> int:
    return 4 * linear_params(dim, dim)


def vit_block_params(dim: int) -> int:
    # two layer norms, attention, 4x MLP
    return (
        4 * dim
        + attention_params(dim)
        + linear_params(dim, 4 * dim)
        + linear_params(4 * dim, dim)
    )


def vit_block_flops(tokens: int, dim: int) -> int:
    return (
        attention_flops(tokens, dim)
        + linear_flops(tokens, dim, 4 * dim)
        + linear_flops(tokens, 4 * dim, dim)
    )


def mlp_sublayer_params(dim: int) -> int:
    return 2 * dim + linear_params(dim, 4 * dim) + linear_params(4 * dim, dim)


@dataclass
class ModuleCost:
    name: str
    flops: int = 0
    trainable: int = 0
    frozen: int = 0

    @property
    def params(self) -> int:
        return self.trainable + self.frozen


@dataclass
class CostReport:
    entries: list[ModuleCost] = field(default_factory=list)
    # frozen scalars on the backward path from the loss to the adapters
    backward_param_touch: int = 0

    @property
    def flops(self) -> int:
        return sum(e.flops for e in self.entries)

    @property
    def gflops(self) -> float:
        return self.flops / 1e9

    @property
    def trainable(self) -> int:
        return sum(e.trainable for e in self.entries)

    @property
    def frozen(self) -> int:
        return sum(e.frozen for e in self.entries)

    @property
    def params(self) -> int:
        return self.trainable + self.frozen

    @property
    def trainable_share(self) -> float:
        return self.trainable / self.params if self.params else 0.0

    def get(self, name: str) -> ModuleCost:
        for entry in self.entries:
            if entry.name == name:
                return entry

        raise KeyError(name)

    def to_dict(self) -> dict[str, ty.Any]:
        return {
            "modules": [
                {
                    "name": e.name,
                    "flops": e.flops,
                    "trainable": e.trainable,
                    "frozen": e.frozen,
                }
                for e in self.entries
            ],
            "flops": self.flops,
            "gflops": self.gflops,
            "trainable": self.trainable,
            "frozen": self.frozen,
            "trainable_share": self.trainable_share,
            "backward_param_touch": self.backward_param_touch,
        }


def _split(count: int, *, trainable: bool) -> dict[str, int]:
    return {"trainable": count} if trainable else {"frozen": count}


def adapter_cost(cfg: ModelConfig) -> ModuleCost:
    """One temporal adapter and its gate at the configured bottleneck."""
    dim, bdim, frames = cfg.width, cfg.bottleneck, cfg.frames
    positions = cfg.num_tokens - 1 if cfg.pta_exclude_cls else cfg.num_tokens
    flops = (
        linear_flops(frames * positions, dim, bdim)
        + positions * attention_flops(frames, bdim)
        + linear_flops(frames * positions, bdim, dim)
    )
    params = (
        linear_params(dim, bdim)
        + attention_params(bdim)
        + linear_params(bdim, dim)
        + 1
    )
    return ModuleCost("pta", flops=flops, trainable=params)


def backward_param_touch(cfg: ModelConfig) -> int:
    """Frozen scalars the backward pass crosses to reach the earliest
    adapter: every later block, the post norm and, depending on the
    variant, part or all of the adapted block itself."""
    adapted = cfg.adapted_blocks()
    if not adapted:
        return 0

    first = adapted[0]
    dim = cfg.width
    own = {
        "block_parallel": 0,
        "attention_parallel": mlp_sublayer_params(dim),
        "cascade": vit_block_params(dim),
    }[cfg.variant]
    later = (cfg.depth - 1 - first) * vit_block_params(dim)
    return later + own + 2 * dim


def text_params(cfg: ModelConfig, vocab_size: int | None = None) -> int:
    if vocab_size is None:
        vocab_size = len(Vocabulary(default_corpus()))

    dim = cfg.width
    return (
        vocab_size * dim
        + MAX_TOKENS * dim
        + cfg.text_layers * vit_block_params(dim)
        + 2 * dim
        + linear_params(dim, cfg.out_dim, bias=False)
    )


def cost_report(cfg: ModelConfig, vocab_size: int | None = None) -> CostReport:
    dim, frames = cfg.width, cfg.frames
    patches, tokens = cfg.num_patches, cfg.num_tokens
    patch_in = cfg.patch_size * cfg.patch_size * cfg.channels

    entries = [
        ModuleCost(
            "patch_embed",
            flops=linear_flops(frames * patches, patch_in, dim),
            frozen=linear_params(patch_in, dim) + dim,
        ),
        ModuleCost(
            "encodings",
            frozen=(1 + patches) * dim
            + (0 if cfg.trainable_te else frames * dim),
            trainable=frames * dim if cfg.trainable_te else 0,
        ),
    ]

    if cfg.spg_enabled:
        passes = cfg.depth if cfg.spg_per_layer else 1
        entries.append(
            ModuleCost(
                "spg",
                flops=(
                    passes * 2 * linear_flops(frames * cfg.num_prompts, dim, dim)
                    if cfg.spg_projector
                    else 0
                ),
                trainable=2 * linear_params(dim, dim) if cfg.spg_projector else 0,
            )
        )

    adapted = set(cfg.adapted_blocks())
    for idx in range(cfg.depth):
        entries.append(
            ModuleCost(
                f"block{idx}",
                flops=frames * vit_block_flops(tokens, dim),
                frozen=vit_block_params(dim),
            )
        )
        if idx in adapted:
            pta = adapter_cost(cfg)
            pta.name = f"pta{idx}"
            entries.append(pta)

    entries.extend(
        (
            ModuleCost("ln_post", frozen=2 * dim),
            ModuleCost(
                "frame_proj",
                flops=linear_flops(frames, dim, cfg.out_dim),
                trainable=linear_params(dim, cfg.out_dim),
            ),
            ModuleCost(
                "aggregator",
                flops=attention_flops(frames, cfg.out_dim),
                trainable=attention_params(cfg.out_dim),
            ),
            ModuleCost("text", frozen=text_params(cfg, vocab_size)),
            ModuleCost(
                "head", **_split(1, trainable=cfg.trainable_temperature)
            ),
        )
    )

    return CostReport(entries=entries, backward_param_touch=backward_param_touch(cfg))
