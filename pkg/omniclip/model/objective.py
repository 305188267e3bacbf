# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Video-text similarity, classification loss and accuracy metrics."""

from __future__ import annotations

import math
import typing as ty

import numpy as np

from omniclip.numerics import Module, ShapeError, Tensor, ops, param


class ZeroNormError(ValueError):
    def __init__(self, which: str, row: int) -> None:
        super().__init__(which, row)
        self.which = which
        self.row = row

    def __str__(self) -> str:
        return f"zero-norm row {self.row} in {self.which} features"


class LabelError(ValueError):
    def __init__(self, label: int, num_classes: int) -> None:
        super().__init__(label, num_classes)
        self.label = label
        self.num_classes = num_classes

    def __str__(self) -> str:
        return f"label {self.label} outside [0, {self.num_classes})"


class SimilarityHead(Module):
    """Logit scale 1/tau and label smoothing of the classification loss."""

    def __init__(
        self,
        temperature: float = 0.07,
        label_smoothing: float = 0.0,
        *,
        trainable: bool = False,
        scaled: bool = True,
    ) -> None:
        if temperature <= 0:
            raise ValueError(temperature)

        if not 0 <= label_smoothing < 1:
            raise ValueError(label_smoothing)

        self.logit_scale = param(
            np.array(1.0 / temperature), "logit_scale", trainable=trainable
        )
        self.label_smoothing = label_smoothing
        self._scaled = scaled

    @property
    def temperature(self) -> float:
        return 1.0 / self.logit_scale.item()

    @property
    def scaled(self) -> bool:
        return self._scaled


def _check_rows(which: str, feats: Tensor) -> None:
    if feats.ndim != 2:
        raise ShapeError("similarity_matrix", f"{which} features must be 2-d")

    norms = np.linalg.norm(feats.data, axis=-1)
    if (zero := np.flatnonzero(norms == 0.0)).size:
        raise ZeroNormError(which, int(zero[0]))


def similarity_matrix(video: Tensor, text: Tensor) -> Tensor:
    """Cosine similarities [B, C] between video and text feature rows."""
    _check_rows("video", video)
    _check_rows("text", text)
    if video.shape[-1] != text.shape[-1]:
        raise ShapeError(
            "similarity_matrix", f"video {video.shape} vs text {text.shape}"
        )

    vid = ops.l2_normalize(video, axis=-1)
    txt = ops.l2_normalize(text, axis=-1)
    return ops.matmul(vid, ops.swap_last(txt))


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ShapeError("labels", "expected 1-d label vector")

    for label in labels:
        if not 0 <= label < num_classes:
            raise LabelError(int(label), num_classes)

    return labels


def smoothed_targets(
    labels: np.ndarray, num_classes: int, smoothing: float
) -> np.ndarray:
    """(1 - eps) on the true class, eps / (C - 1) elsewhere."""
    labels = _check_labels(labels, num_classes)
    off = smoothing / (num_classes - 1) if num_classes > 1 else 0.0
    targets = np.full((labels.size, num_classes), off)
    targets[np.arange(labels.size), labels] = 1.0 - smoothing
    return targets


def classification_loss(
    sims: Tensor, labels: ty.Sequence[int] | np.ndarray, head: SimilarityHead
) -> Tensor:
    """Mean cross-entropy of smoothed one-hot targets vs softmax(sims/tau)."""
    bsz, num_classes = sims.shape
    targets = smoothed_targets(np.asarray(labels), num_classes, head.label_smoothing)
    if targets.shape[0] != bsz:
        raise ShapeError(
            "classification_loss", f"{targets.shape[0]} labels for {bsz} rows"
        )

    logits = ops.mul(sims, head.logit_scale) if head.scaled else sims
    logp = ops.log_softmax(logits, axis=-1)
    total = ops.sum_(ops.mul(logp, Tensor(targets, dtype=sims.dtype)))
    return ops.scale(total, -1.0 / bsz)


def top_k(sims: np.ndarray, k: int) -> np.ndarray:
    """Indices [B, k] of the k largest entries per row; on ties the lower
    class index ranks first."""
    num_classes = sims.shape[-1]
    if not 1 <= k <= num_classes:
        raise ValueError(f"k={k} outside 1..{num_classes}")

    # stable sort of negated values keeps lower index first among ties
    order = np.argsort(-sims, axis=-1, kind="stable")
    return order[..., :k]


def top_k_accuracy(
    sims: Tensor | np.ndarray, labels: ty.Sequence[int] | np.ndarray, k: int
) -> float:
    data = sims.data if isinstance(sims, Tensor) else np.asarray(sims)
    labels = _check_labels(np.asarray(labels), data.shape[-1])
    if labels.size == 0:
        return math.nan

    hits = (top_k(data, k) == labels[:, np.newaxis]).any(axis=-1)
    return float(hits.mean())


def per_class_accuracy(
    sims: Tensor | np.ndarray,
    labels: ty.Sequence[int] | np.ndarray,
) -> list[float]:
    """Top-1 accuracy for each class; nan for classes without samples."""
    data = sims.data if isinstance(sims, Tensor) else np.asarray(sims)
    labels = _check_labels(np.asarray(labels), data.shape[-1])
    pred = top_k(data, 1)[:, 0] if labels.size else np.zeros(0, dtype=np.int64)
    res = []
    for cls in range(data.shape[-1]):
        mask = labels == cls
        res.append(float((pred[mask] == cls).mean()) if mask.any() else math.nan)

    return res
