# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Self-prompt generator.

Patch tokens of every frame are pooled over 2x2 windows of the patch grid
and passed through a small projector; the K/4 resulting prompt tokens are
appended to the frame's token sequence.
"""

from __future__ import annotations

import math

from omniclip.numerics import Linear, Module, ShapeError, SplitMix64, Tensor, ops


class SelfPromptGenerator(Module):
    def __init__(
        self,
        rng: SplitMix64,
        dim: int,
        *,
        pooling: str = "avg",
        projector: bool = True,
    ) -> None:
        self.fc1 = (
            Linear(rng.spawn("fc1"), dim, dim, trainable=True) if projector else None
        )
        self.fc2 = (
            Linear(rng.spawn("fc2"), dim, dim, trainable=True) if projector else None
        )
        self._pooling = pooling

    @property
    def pooling(self) -> str:
        return self._pooling

    def project(self, x: Tensor) -> Tensor:
        if self.fc1 is None or self.fc2 is None:
            return x

        return self.fc2(ops.gelu(self.fc1(x)))


def grid_side(num_patches: int) -> int:
    side = math.isqrt(num_patches)
    if side * side != num_patches or side % 2:
        raise ShapeError(
            "generate_prompts", f"{num_patches} patches do not form an even grid"
        )

    return side


def generate_prompts(spg: SelfPromptGenerator, tokens: Tensor) -> Tensor:
    """[.., 1+K, d] -> [.., K/4, d]; the class token is not pooled."""
    *lead, num, dim = tokens.shape
    side = grid_side(num - 1)

    patches = ops.narrow(tokens, -2, 1, num - 1)
    grid = ops.reshape(patches, (*lead, side, side, dim))
    pooled = (
        ops.max_pool_2x2(grid) if spg.pooling == "max" else ops.avg_pool_2x2(grid)
    )
    flat = ops.reshape(pooled, (*lead, (side // 2) ** 2, dim))
    return spg.project(flat)


def concat_prompts(tokens: Tensor, prompts: Tensor) -> Tensor:
    """[.., 1+K, d] + [.., K/4, d] -> [.., 1+K+K/4, d]; original tokens
    keep their positions."""
    if tokens.shape[:-2] != prompts.shape[:-2] or tokens.shape[-1] != prompts.shape[-1]:
        raise ShapeError(
            "concat_prompts", f"tokens {tokens.shape} vs prompts {prompts.shape}"
        )

    return ops.concat([tokens, prompts], axis=-2)
