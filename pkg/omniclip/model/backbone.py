# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# ruff: noqa: PLR2004

"""Frozen spatial backbone: patch embedding, encodings and ViT blocks."""

from __future__ import annotations

import logging

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
    ops,
    param,
)

_LOG = logging.getLogger(__name__)


class PatchEmbedder(Module):
    def __init__(
        self, rng: SplitMix64, patch_size: int, channels: int, dim: int
    ) -> None:
        self.proj = Linear(
            rng.spawn("proj"), patch_size * patch_size * channels, dim,
            trainable=False,
        )
        self.cls_token = param(
            rng.spawn("cls").normal((dim,), std=0.02), "cls_token",
            trainable=False,
        )
        self._patch_size = patch_size
        self._channels = channels

    @property
    def patch_size(self) -> int:
        return self._patch_size

    @property
    def dim(self) -> int:
        return self.proj.fan_out


class Encodings(Module):
    """Positional encoding over 1+K positions, temporal over T frames."""

    def __init__(
        self,
        rng: SplitMix64,
        positions: int,
        frames: int,
        dim: int,
        *,
        trainable_te: bool = False,
    ) -> None:
        self.pe = param(
            rng.spawn("pe").normal((positions, dim), std=0.02), "pe",
            trainable=False,
        )
        self.te = param(
            rng.spawn("te").normal((frames, dim), std=0.02), "te",
            trainable=trainable_te,
        )


class ViTBlock(Module):
    """Pre-norm block: LN -> MHA -> residual, LN -> MLP(4d, gelu) -> residual."""

    def __init__(
        self,
        rng: SplitMix64,
        dim: int,
        heads: int,
        *,
        trainable: bool = False,
        eps: float = 1e-5,
    ) -> None:
        self.ln1 = LayerNorm(dim, trainable=trainable, eps=eps)
        self.attn = AttentionWeights(
            rng.spawn("attn"), dim, heads, trainable=trainable
        )
        self.ln2 = LayerNorm(dim, trainable=trainable, eps=eps)
        self.fc1 = Linear(rng.spawn("fc1"), dim, 4 * dim, trainable=trainable)
        self.fc2 = Linear(rng.spawn("fc2"), 4 * dim, dim, trainable=trainable)

    @property
    def frozen(self) -> bool:
        return not any(t.trainable for t in self.parameters())

    def attention_sublayer(
        self, x: Tensor, weights_out: list[Tensor] | None = None
    ) -> Tensor:
        return multi_head_attention(
            self.ln1(x), self.attn, weights_out=weights_out
        )

    def mlp_sublayer(self, x: Tensor) -> Tensor:
        return self.fc2(ops.gelu(self.fc1(self.ln2(x))))


def patchify(pixels: np.ndarray, patch_size: int) -> np.ndarray:
    """[.., C, H, W] -> [.., K, C*P*P]; patches in row-major grid order,
    each flattened as (channel, row, column)."""
    *lead, chans, height, width = pixels.shape
    if height % patch_size or width % patch_size:
        raise ShapeError(
            "patch_embed", f"{height}x{width} not divisible by {patch_size}"
        )

    gh, gw = height // patch_size, width // patch_size
    grid = pixels.reshape(
        (*lead, chans, gh, patch_size, gw, patch_size)
    )
    nl = len(lead)
    perm = (*range(nl), nl + 1, nl + 3, nl, nl + 2, nl + 4)
    return np.ascontiguousarray(np.transpose(grid, perm)).reshape(
        (*lead, gh * gw, chans * patch_size * patch_size)
    )


def patch_embed(embedder: PatchEmbedder, video: np.ndarray) -> Tensor:
    """[B, T, C, H, W] pixels -> [B, T, 1+K, d] tokens, class token first."""
    if video.ndim != 5:
        raise ShapeError("patch_embed", "expected [B, T, C, H, W]")

    dtype = embedder.proj.weight.dtype
    patches = Tensor(patchify(video, embedder.patch_size), dtype=dtype)
    tokens = embedder.proj(patches)
    bsz, frames = video.shape[:2]
    cls = ops.expand(
        ops.reshape(embedder.cls_token, (1, 1, 1, embedder.dim)),
        (bsz, frames, 1, embedder.dim),
    )
    return ops.concat([cls, tokens], axis=2)


def add_encodings(tokens: Tensor, enc: Encodings) -> Tensor:
    """out[b, t, j] = tokens[b, t, j] + PE[j] + TE[t]."""
    frames = tokens.shape[-3]
    if enc.te.shape[0] != frames or enc.pe.shape[0] != tokens.shape[-2]:
        raise ShapeError(
            "add_encodings",
            f"tokens {tokens.shape} vs pe {enc.pe.shape} te {enc.te.shape}",
        )

    te = ops.reshape(enc.te, (frames, 1, enc.te.shape[-1]))
    return ops.add(ops.add(tokens, enc.pe), te)


def vit_block_forward(
    block: ViTBlock,
    tokens: Tensor,
    weights_out: list[Tensor] | None = None,
) -> Tensor:
    """Standard pre-norm block; attention runs over axis -2 only, so frames
    kept in leading axes never attend to each other."""
    hidden = ops.add(tokens, block.attention_sublayer(tokens, weights_out))
    return ops.add(hidden, block.mlp_sublayer(hidden))
