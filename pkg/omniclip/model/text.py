# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Frozen toy text tower.

Class names are wrapped in the template "a video of <name> action",
tokenised on whitespace, embedded, run through a few pre-norm blocks and
projected; the embedding of the last token is the text feature.
"""

from __future__ import annotations

import logging
import typing as ty

import numpy as np

from omniclip import consts
from omniclip.numerics import (
    LayerNorm,
    Linear,
    Module,
    ShapeError,
    SplitMix64,
    Tensor,
    no_grad,
    ops,
    param,
)

from .backbone import ViTBlock, vit_block_forward

_LOG = logging.getLogger(__name__)

MAX_TOKENS: ty.Final = 16


class VocabularyError(KeyError):
    def __init__(self, word: str, name: str) -> None:
        super().__init__(word)
        self.word = word
        self.name = name

    def __str__(self) -> str:
        return f"unknown word {self.word!r} in class name {self.name!r}"


def tokenize(name: str) -> list[str]:
    return name.lower().split()


def template(name: str) -> list[str]:
    return [*consts.TEMPLATE_PREFIX, *tokenize(name), *consts.TEMPLATE_SUFFIX]


class Vocabulary:
    """Sorted word list built from the template and a corpus of names."""

    def __init__(self, names: ty.Iterable[str]) -> None:
        words = set(consts.TEMPLATE_PREFIX) | set(consts.TEMPLATE_SUFFIX)
        for name in names:
            words.update(tokenize(name))

        self.words: list[str] = sorted(words)
        self._index = {word: idx for idx, word in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def encode(self, name: str) -> list[int]:
        ids = []
        for word in template(name):
            try:
                ids.append(self._index[word])
            except KeyError:
                raise VocabularyError(word, name) from None

        return ids


def default_corpus() -> list[str]:
    """Names of every class of every label map of the synthetic data."""
    return [
        *consts.MOTIONS,
        *consts.SCALES,
        *(f"{m} {s}" for m in consts.MOTION_CLASSES for s in consts.SCALES),
    ]


class TextEncoder(Module):
    def __init__(
        self,
        rng: SplitMix64,
        corpus: ty.Iterable[str],
        *,
        dim: int,
        out_dim: int,
        heads: int,
        layers: int,
        eps: float = 1e-5,
    ) -> None:
        self._vocab = Vocabulary(corpus)
        self.embedding = param(
            rng.spawn("embedding").normal((len(self._vocab), dim)),
            "embedding",
            trainable=False,
        )
        self.positions = param(
            rng.spawn("positions").normal((MAX_TOKENS, dim), std=0.1),
            "positions",
            trainable=False,
        )
        self.blocks = [
            ViTBlock(rng.spawn("block", idx), dim, heads, eps=eps)
            for idx in range(layers)
        ]
        self.ln_final = LayerNorm(dim, trainable=False, eps=eps)
        self.proj = Linear(
            rng.spawn("proj"), dim, out_dim, trainable=False, bias=False
        )

    @property
    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def encode_one(self, name: str) -> Tensor:
        ids = self._vocab.encode(name)
        if len(ids) > MAX_TOKENS:
            raise ShapeError("text_encode", f"{name!r} longer than {MAX_TOKENS}")

        hidden = Tensor(
            self.embedding.data[ids] + self.positions.data[: len(ids)],
            dtype=self.embedding.dtype,
        )
        for block in self.blocks:
            hidden = vit_block_forward(block, hidden)

        last = ops.narrow(hidden, 0, len(ids) - 1, 1)
        return ops.reshape(self.proj(self.ln_final(last)), (self.proj.fan_out,))


def text_encode(encoder: TextEncoder, class_names: ty.Sequence[str]) -> Tensor:
    """[C, d_out] features, one per class name; deterministic and constant."""
    with no_grad():
        rows = [encoder.encode_one(name).data for name in class_names]

    _LOG.debug("encoded %d class names", len(rows))
    dtype = encoder.proj.weight.dtype
    if not rows:
        return Tensor(np.zeros((0, encoder.proj.fan_out)), dtype=dtype)

    return Tensor(np.stack(rows), dtype=dtype)
