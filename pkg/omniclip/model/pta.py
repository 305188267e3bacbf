# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Parallel temporal adapter.

Tokens are projected to a bottleneck of width b, attend across frames
independently at every token position, and are projected back to d. The
adapter output is mixed into the spatial stream through a learned scalar
gate that starts at zero.
"""

from __future__ import annotations

import numpy as np

from omniclip.numerics import (
    AttentionWeights,
    Linear,
    Module,
    ShapeError,
    SplitMix64,
    Tensor,
    multi_head_attention,
    ops,
    param,
)


class ParallelTemporalAdapter(Module):
    def __init__(
        self, rng: SplitMix64, dim: int, bottleneck: int, heads: int
    ) -> None:
        if not 1 <= bottleneck <= dim:
            raise ShapeError("pta", f"bottleneck {bottleneck} outside 1..{dim}")

        self.down = Linear(rng.spawn("down"), dim, bottleneck, trainable=True)
        self.attn = AttentionWeights(
            rng.spawn("attn"), bottleneck, heads, trainable=True
        )
        self.up = Linear(rng.spawn("up"), bottleneck, dim, trainable=True)

    @property
    def bottleneck(self) -> int:
        return self.down.fan_out


class FusionGate(Module):
    def __init__(self, init: float = 0.0) -> None:
        self.alpha = param(np.array(init), "alpha", trainable=True)

    @property
    def value(self) -> float:
        return self.alpha.item()


def _swap_frames_tokens(x: Tensor) -> Tensor:
    # [.., T, N, c] <-> [.., N, T, c]
    nd = x.ndim
    return ops.transpose(x, (*range(nd - 3), nd - 2, nd - 3, nd - 1))


def pta_forward(
    adapter: ParallelTemporalAdapter,
    tokens: Tensor,
    *,
    exclude_cls: bool = False,
) -> Tensor:
    """[B, T, N, d] -> [B, T, N, d]; attention runs over T only.

    With `exclude_cls` the class token position gets a zero output.
    """
    if tokens.ndim < 3:
        raise ShapeError("pta_forward", "expected [.., T, N, d]")

    if exclude_cls:
        num = tokens.shape[-2]
        rest = pta_forward(adapter, ops.narrow(tokens, -2, 1, num - 1))
        zeros = Tensor(
            np.zeros((*tokens.shape[:-2], 1, tokens.shape[-1])),
            dtype=tokens.dtype,
        )
        return ops.concat([zeros, rest], axis=-2)

    low = adapter.down(tokens)
    mixed = multi_head_attention(_swap_frames_tokens(low), adapter.attn)
    return adapter.up(_swap_frames_tokens(mixed))


def fuse(spatial: Tensor, temporal: Tensor, gate: FusionGate) -> Tensor:
    """spatial + alpha * temporal."""
    if spatial.shape != temporal.shape:
        raise ShapeError(
            "fuse", f"spatial {spatial.shape} vs temporal {temporal.shape}"
        )

    return ops.add(spatial, ops.mul(temporal, gate.alpha))
