# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Multi-head scaled dot-product self-attention."""

from __future__ import annotations

import math
import typing as ty

from . import ops
from ._support import ShapeError
from .module import Linear, Module
from .rng import SplitMix64

if ty.TYPE_CHECKING:
    from .tensor import Tensor


class AttentionWeights(Module):
    """Projections Wq, Wk, Wv, Wo (each with bias) of one attention layer."""

    def __init__(
        self,
        rng: SplitMix64,
        dim: int,
        heads: int,
        *,
        trainable: bool,
    ) -> None:
        if heads < 1 or dim % heads:
            raise ShapeError("attention", f"dim {dim} not divisible by {heads}")

        self.wq = Linear(rng, dim, dim, trainable=trainable)
        self.wk = Linear(rng, dim, dim, trainable=trainable)
        self.wv = Linear(rng, dim, dim, trainable=trainable)
        self.wo = Linear(rng, dim, dim, trainable=trainable)
        self._heads = heads

    @property
    def dim(self) -> int:
        return self.wq.fan_in

    @property
    def heads(self) -> int:
        return self._heads


def _split_heads(x: Tensor, heads: int) -> Tensor:
    # [.., n, d] -> [.., h, n, d/h]
    *lead, n, dim = x.shape
    x = ops.reshape(x, (*lead, n, heads, dim // heads))
    nd = x.ndim
    return ops.transpose(x, (*range(nd - 3), nd - 2, nd - 3, nd - 1))


def _merge_heads(x: Tensor) -> Tensor:
    # [.., h, n, dh] -> [.., n, h*dh]
    *lead, heads, n, dh = x.shape
    nd = x.ndim
    x = ops.transpose(x, (*range(nd - 3), nd - 2, nd - 3, nd - 1))
    return ops.reshape(x, (*lead, n, heads * dh))


def multi_head_attention(
    x: Tensor,
    params: AttentionWeights,
    heads: int | None = None,
    *,
    weights_out: list[Tensor] | None = None,
) -> Tensor:
    """Self-attention over axis -2 of x[.., n, d].

    Scores are scaled by 1/sqrt(d/heads). When `weights_out` is given the
    attention weights [.., heads, n, n] are appended to it.
    """
    heads = heads or params.heads
    dim = x.shape[-1]
    if dim % heads:
        raise ShapeError("multi_head_attention", f"{dim} % {heads} != 0")

    if dim != params.dim:
        raise ShapeError(
            "multi_head_attention", f"input dim {dim} != weights {params.dim}"
        )

    q = _split_heads(params.wq(x), heads)
    k = _split_heads(params.wk(x), heads)
    v = _split_heads(params.wv(x), heads)

    scores = ops.scale(ops.matmul(q, ops.swap_last(k)), 1 / math.sqrt(dim // heads))
    attn = ops.softmax(scores, axis=-1)
    if weights_out is not None:
        weights_out.append(attn)

    ctx = _merge_heads(ops.matmul(attn, v))
    return params.wo(ctx)
