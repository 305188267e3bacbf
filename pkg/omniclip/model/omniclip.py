# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Complete video-text model: video encoder, text tower and head."""

from __future__ import annotations

import logging
import typing as ty
from dataclasses import dataclass

import numpy as np

from omniclip.numerics import (
    Module,
    SplitMix64,
    Tensor,
    cast_parameters,
    derive_seed,
    no_grad,
)

from . import encoder as enc
from . import objective, text

if ty.TYPE_CHECKING:
    from omniclip.config import ModelConfig

_LOG = logging.getLogger(__name__)


@dataclass
class EncoderState:
    """Parameters split by trainability, keyed by dotted name."""

    frozen: dict[str, Tensor]
    trainable: dict[str, Tensor]

    def num_frozen(self) -> int:
        return sum(t.size for t in self.frozen.values())

    def num_trainable(self) -> int:
        return sum(t.size for t in self.trainable.values())


class OmniClip(Module):
    def __init__(
        self,
        config: ModelConfig,
        corpus: ty.Iterable[str] | None = None,
        label_smoothing: float = 0.0,
    ) -> None:
        self._config = config
        rng = SplitMix64(derive_seed(config.seed, "init"))

        self.encoder = enc.OmniVideoEncoder(config, rng.spawn("video"))
        self.text = text.TextEncoder(
            rng.spawn("text"),
            text.default_corpus() if corpus is None else corpus,
            dim=config.width,
            out_dim=config.out_dim,
            heads=config.heads,
            layers=config.text_layers,
            eps=config.ln_eps,
        )
        self.head = objective.SimilarityHead(
            config.temperature,
            label_smoothing,
            trainable=config.trainable_temperature,
            scaled=config.scaled_logits,
        )
        cast_parameters(self, config.np_dtype)
        self.name_parameters()
        self._text_cache: dict[tuple[str, ...], Tensor] = {}

        _LOG.debug(
            "model: %d params, %d trainable",
            self.num_parameters(),
            self.state().num_trainable(),
        )

    @property
    def config(self) -> ModelConfig:
        return self._config

    @property
    def vocabulary(self) -> list[str]:
        return list(self.text.vocabulary.words)

    def state(self) -> EncoderState:
        frozen: dict[str, Tensor] = {}
        trainable: dict[str, Tensor] = {}
        for name, tensor in self.named_parameters():
            (trainable if tensor.trainable else frozen)[name] = tensor

        return EncoderState(frozen=frozen, trainable=trainable)

    def trainable_parameters(self) -> dict[str, Tensor]:
        return self.state().trainable

    def class_features(self, class_names: ty.Sequence[str]) -> Tensor:
        """Text features of class names; cached, the text tower is frozen."""
        key = tuple(class_names)
        if (feats := self._text_cache.get(key)) is None:
            feats = text.text_encode(self.text, key)
            self._text_cache[key] = feats

        return feats

    def similarities(
        self,
        video: object,
        class_names: ty.Sequence[str],
        trace: enc.EncoderTrace | None = None,
    ) -> Tensor:
        feats = enc.encode_video(self.encoder, video, trace)
        return objective.similarity_matrix(feats, self.class_features(class_names))

    def predict(self, video: object, class_names: ty.Sequence[str]) -> np.ndarray:
        """Similarities [B, C] without gradient tracking."""
        with no_grad():
            return self.similarities(video, class_names).data

    def clear_text_cache(self) -> None:
        self._text_cache.clear()
