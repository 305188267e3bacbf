# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# ruff: noqa: PLR2004

"""Video encoder: frozen spatial blocks with temporal adapters and prompts."""

from __future__ import annotations

import logging
import typing as ty
from dataclasses import dataclass, field

import numpy as np

from omniclip.numerics import (
    AttentionWeights,
    LayerNorm,
    Linear,
    Module,
    ShapeError,
    SplitMix64,
    Tensor,
    multi_head_attention,
    no_grad,
    ops,
)

from . import backbone, pta, spg

if ty.TYPE_CHECKING:
    from omniclip.config import ModelConfig

_LOG = logging.getLogger(__name__)


class LayerIndexError(IndexError):
    def __init__(self, layer: int, depth: int) -> None:
        super().__init__(layer)
        self.layer = layer
        self.depth = depth

    def __str__(self) -> str:
        return f"layer {self.layer} outside encoder of depth {self.depth}"


class SpatialTemporalBlock(Module):
    """Frozen spatial block, optionally paired with an adapter and gate."""

    def __init__(
        self,
        vit: backbone.ViTBlock,
        adapter: pta.ParallelTemporalAdapter | None = None,
        gate: pta.FusionGate | None = None,
    ) -> None:
        self.vit = vit
        self.adapter = adapter
        self.gate = gate

    @property
    def adapted(self) -> bool:
        return self.adapter is not None


@dataclass
class EncoderTrace:
    """Spatial attention weights [B, T, h, N, N] captured per block index."""

    attention: dict[int, Tensor] = field(default_factory=dict)


def block_forward(
    block: SpatialTemporalBlock,
    tokens: Tensor,
    variant: str = "block_parallel",
    *,
    exclude_cls: bool = False,
    weights_out: list[Tensor] | None = None,
) -> Tensor:
    """Run one block on [B, T, N, d] tokens.

    block_parallel: fuse(vit(x), pta(x));
    attention_parallel: the adapter runs beside the attention sublayer only;
    cascade: vit(fuse(x, pta(x))).
    With alpha = 0 every variant returns vit(x) exactly.
    """
    vit = block.vit
    if block.adapter is None or block.gate is None:
        return backbone.vit_block_forward(vit, tokens, weights_out)

    temporal = pta.pta_forward(block.adapter, tokens, exclude_cls=exclude_cls)
    match variant:
        case "block_parallel":
            spatial = backbone.vit_block_forward(vit, tokens, weights_out)
            return pta.fuse(spatial, temporal, block.gate)

        case "attention_parallel":
            attended = ops.add(tokens, vit.attention_sublayer(tokens, weights_out))
            hidden = pta.fuse(attended, temporal, block.gate)
            return ops.add(hidden, vit.mlp_sublayer(hidden))

        case "cascade":
            hidden = pta.fuse(tokens, temporal, block.gate)
            return backbone.vit_block_forward(vit, hidden, weights_out)

    raise ValueError(variant)


class OmniVideoEncoder(Module):
    def __init__(self, config: ModelConfig, rng: SplitMix64) -> None:
        dim = config.width
        self._config = config

        self.embed = backbone.PatchEmbedder(
            rng.spawn("embed"), config.patch_size, config.channels, dim
        )
        self.encodings = backbone.Encodings(
            rng.spawn("encodings"),
            1 + config.num_patches,
            config.frames,
            dim,
            trainable_te=config.trainable_te,
        )
        self.spg = (
            spg.SelfPromptGenerator(
                rng.spawn("spg"),
                dim,
                pooling=config.spg_pooling,
                projector=config.spg_projector,
            )
            if config.spg_enabled
            else None
        )

        adapted = set(config.adapted_blocks())
        self.blocks = [
            self._make_block(rng, idx, adapted=idx in adapted)
            for idx in range(config.depth)
        ]

        self.ln_post = LayerNorm(dim, trainable=False, eps=config.ln_eps)
        self.frame_proj = Linear(
            rng.spawn("frame_proj"), dim, config.out_dim, trainable=True
        )
        self.aggregator = AttentionWeights(
            rng.spawn("aggregator"),
            config.out_dim,
            config.agg_heads,
            trainable=True,
        )

    def _make_block(
        self, rng: SplitMix64, idx: int, *, adapted: bool
    ) -> SpatialTemporalBlock:
        cfg = self._config
        vit = backbone.ViTBlock(
            rng.spawn("block", idx), cfg.width, cfg.heads, eps=cfg.ln_eps
        )
        if not adapted:
            return SpatialTemporalBlock(vit)

        adapter = pta.ParallelTemporalAdapter(
            rng.spawn("pta", idx),
            cfg.width,
            cfg.bottleneck,
            cfg.bottleneck_heads,
        )
        return SpatialTemporalBlock(vit, adapter, pta.FusionGate(cfg.alpha_init))

    @property
    def config(self) -> ModelConfig:
        return self._config

    @property
    def depth(self) -> int:
        return len(self.blocks)


def _pixels(video: object) -> np.ndarray:
    pixels = getattr(video, "pixels", video)
    if not isinstance(pixels, np.ndarray):
        pixels = np.asarray(pixels)

    if pixels.ndim == 4:
        # single clip [T, C, H, W]
        pixels = pixels[np.newaxis]

    return pixels


def _check_video(cfg: ModelConfig, pixels: np.ndarray) -> None:
    expected = (cfg.frames, cfg.channels, cfg.image_size, cfg.image_size)
    if pixels.ndim != 5 or pixels.shape[1:] != expected:
        raise ShapeError(
            "encode_video",
            f"video {pixels.shape} does not match [B, {', '.join(map(str, expected))}]",
        )


def encode_tokens(
    encoder: OmniVideoEncoder,
    pixels: np.ndarray,
    trace: EncoderTrace | None = None,
) -> Tensor:
    """Run embedding, prompts and all blocks; returns [B, T, N, d]."""
    cfg = encoder.config
    tokens = backbone.add_encodings(
        backbone.patch_embed(encoder.embed, pixels), encoder.encodings
    )
    base = 1 + cfg.num_patches
    if encoder.spg is not None:
        tokens = spg.concat_prompts(
            tokens, spg.generate_prompts(encoder.spg, tokens)
        )

    for idx, block in enumerate(encoder.blocks):
        if encoder.spg is not None and cfg.spg_per_layer and idx > 0:
            head = ops.narrow(tokens, -2, 0, base)
            tokens = spg.concat_prompts(
                head, spg.generate_prompts(encoder.spg, head)
            )

        weights: list[Tensor] | None = [] if trace is not None else None
        tokens = block_forward(
            block,
            tokens,
            cfg.variant,
            exclude_cls=cfg.pta_exclude_cls,
            weights_out=weights,
        )
        if trace is not None and weights:
            trace.attention[idx] = weights[0]

    return tokens


def aggregate_frames(encoder: OmniVideoEncoder, frames: Tensor) -> Tensor:
    """[B, T, d_out] -> [B, d_out]: self-attention across frames, then mean."""
    mixed = multi_head_attention(frames, encoder.aggregator)
    return ops.mean(mixed, axis=-2)


def encode_video(
    encoder: OmniVideoEncoder,
    video: object,
    trace: EncoderTrace | None = None,
) -> Tensor:
    """Video embedding [B, d_out] for pixels [B, T, C, H, W] (or a batch
    object exposing `pixels`)."""
    pixels = _pixels(video)
    _check_video(encoder.config, pixels)
    pixels = pixels.astype(encoder.config.np_dtype, copy=False)

    tokens = encode_tokens(encoder, pixels, trace)
    cls = ops.select(tokens, -2, 0)
    frames = encoder.frame_proj(encoder.ln_post(cls))
    return aggregate_frames(encoder, frames)


@dataclass
class AttentionMap:
    """Class-token attention of one block.

    grid: [B, T, s, s] weights over the patch tokens; mass: [B, T] share
    of attention that lands on patches; rows: [B, T, N] the full row,
    which sums to one.
    """

    layer: int
    grid: np.ndarray
    mass: np.ndarray
    rows: np.ndarray


def attention_heatmap(
    encoder: OmniVideoEncoder, video: object, layer: int = -1
) -> AttentionMap:
    """Head-averaged class-token attention to patches at block `layer`."""
    depth = encoder.depth
    if not -depth <= layer < depth:
        raise LayerIndexError(layer, depth)

    layer %= depth
    cfg = encoder.config
    pixels = _pixels(video)
    _check_video(cfg, pixels)

    trace = EncoderTrace()
    with no_grad():
        encode_tokens(
            encoder, pixels.astype(cfg.np_dtype, copy=False), trace
        )

    weights = trace.attention[layer].data
    rows = weights[..., 0, :].mean(axis=-2)
    patches = rows[..., 1 : 1 + cfg.num_patches]
    side = cfg.grid_side
    _LOG.debug("heatmap layer %d rows %s", layer, rows.shape)
    return AttentionMap(
        layer=layer,
        grid=patches.reshape((*patches.shape[:-1], side, side)),
        mass=patches.sum(axis=-1),
        rows=rows,
    )
