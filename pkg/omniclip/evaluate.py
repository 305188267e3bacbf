# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Evaluation protocols: supervised, few-shot and held-out-class zero-shot."""

from __future__ import annotations

import logging
import math
import typing as ty
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import data_synth
from .ckpt_io import Checkpoint, restore_model
from .model import OmniClip, encoder, objective
from .numerics import SplitMix64, derive_seed, no_grad
from .train import train

if ty.TYPE_CHECKING:
    from .config import ModelConfig, TrainConfig
    from .data_synth import DatasetManifest, VideoBatch

_LOG = logging.getLogger(__name__)

EVAL_BATCH: ty.Final = 32


class ProtocolError(ValueError):
    def __init__(self, protocol: str, reason: str) -> None:
        super().__init__(protocol, reason)
        self.protocol = protocol
        self.reason = reason

    def __str__(self) -> str:
        return f"{self.protocol} protocol: {self.reason}"


@dataclass(frozen=True)
class Supervised:
    split: str = "test"

    @property
    def name(self) -> str:
        return "supervised"


@dataclass(frozen=True)
class FewShot:
    k: int
    split: str = "test"

    @property
    def name(self) -> str:
        return f"few_shot({self.k})"


@dataclass(frozen=True)
class ZeroShot:
    held_out: tuple[str, ...]
    # "all": every class competes; "held_out": only the unseen ones
    candidates: str = "all"

    @property
    def name(self) -> str:
        return f"zero_shot({','.join(self.held_out)})"


Protocol = Supervised | FewShot | ZeroShot


def parse_protocol(text: str) -> Protocol:
    """supervised | few_shot:<K> | zero_shot:<class>[,<class>...]"""
    kind, _, arg = text.partition(":")
    match kind:
        case "supervised":
            return Supervised()
        case "few_shot" if arg.isdigit():
            return FewShot(int(arg))
        case "zero_shot" if arg:
            return ZeroShot(tuple(a.strip() for a in arg.split(",")))

    raise ProtocolError(text, "expected supervised, few_shot:K or zero_shot:C")


@dataclass
class EvalMetrics:
    protocol: str
    top1: float
    top5: float
    per_class: list[float]
    classes: list[str]
    count: int

    def to_dict(self) -> dict[str, ty.Any]:
        return {
            "protocol": self.protocol,
            "top1": self.top1,
            "top5": self.top5,
            "per_class": {
                name: None if math.isnan(acc) else acc
                for name, acc in zip(self.classes, self.per_class, strict=True)
            },
            "count": self.count,
        }


def similarity_scores(
    model: OmniClip,
    batch: VideoBatch,
    class_names: ty.Sequence[str],
    workers: int | None = None,
) -> np.ndarray:
    """[B, C] similarities, computed in chunks, optionally on threads."""
    feats = model.class_features(class_names)
    chunks = [
        batch.pixels[start : start + EVAL_BATCH]
        for start in range(0, len(batch), EVAL_BATCH)
    ]

    def run(pixels: np.ndarray) -> np.ndarray:
        # no_grad state is per thread context
        with no_grad():
            video = encoder.encode_video(model.encoder, pixels)
            return objective.similarity_matrix(video, feats).data

    if workers and workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(chunk) for chunk in chunks]

    if not parts:
        return np.zeros((0, len(class_names)))

    return np.concatenate(parts)


def score(
    model: OmniClip,
    batch: VideoBatch,
    class_names: list[str],
    labels: np.ndarray,
    protocol: str,
    workers: int | None = None,
) -> EvalMetrics:
    sims = similarity_scores(model, batch, class_names, workers)
    return EvalMetrics(
        protocol=protocol,
        top1=objective.top_k_accuracy(sims, labels, 1),
        top5=objective.top_k_accuracy(sims, labels, min(5, len(class_names))),
        per_class=objective.per_class_accuracy(sims, labels),
        classes=class_names,
        count=len(batch),
    )


def _as_model(model: OmniClip | Checkpoint) -> OmniClip:
    if isinstance(model, Checkpoint):
        return restore_model(model)

    return model


def _check_few_shot(manifest: DatasetManifest, k: int) -> None:
    counts = manifest.class_counts("train")
    if any(c != k for c in counts):
        raise ProtocolError(
            f"few_shot({k})", f"train split has {counts} items per class"
        )


def _check_zero_shot(manifest: DatasetManifest, held_out: ty.Sequence[str]) -> None:
    names = manifest.classes
    if unknown := set(held_out) - set(names):
        raise ProtocolError("zero_shot", f"unknown classes {sorted(unknown)}")

    hidden = {names.index(n) for n in held_out}
    for split in ("train", "val"):
        if split not in manifest.splits:
            continue

        labels = set(manifest.labels(split).tolist())
        if leaked := labels & hidden:
            raise ProtocolError(
                "zero_shot",
                f"held-out classes {sorted(names[i] for i in leaked)} "
                f"appear in the {split} split",
            )


def evaluate(
    model: OmniClip | Checkpoint,
    manifest: DatasetManifest,
    protocol: Protocol | None = None,
    workers: int | None = None,
) -> EvalMetrics:
    protocol = protocol or Supervised()
    model = _as_model(model)
    names = manifest.classes

    match protocol:
        case ZeroShot(held_out=held_out, candidates=candidates):
            _check_zero_shot(manifest, held_out)
            hidden = [names.index(n) for n in held_out]
            idx = [
                i for i in manifest.split("test")
                if manifest.items[i].label in hidden
            ]
            class_names = list(held_out) if candidates == "held_out" else names
            remap = np.array(
                [class_names.index(n) if n in class_names else -1 for n in names]
            )
        case FewShot(k=k, split=split):
            _check_few_shot(manifest, k)
            idx, class_names, remap = manifest.split(split), names, None
        case Supervised(split=split):
            idx, class_names, remap = manifest.split(split), names, None

    if not idx:
        raise ProtocolError(protocol.name, "empty split")

    batch = data_synth.render(manifest, idx, workers)
    labels = batch.labels if remap is None else remap[batch.labels]
    metrics = score(model, batch, class_names, labels, protocol.name, workers)
    _LOG.info("%s: top1 %.4f top5 %.4f", protocol.name, metrics.top1, metrics.top5)
    return metrics


def run_few_shot(
    model_cfg: ModelConfig,
    manifest: DatasetManifest,
    shots: ty.Sequence[int],
    train_cfg: TrainConfig,
    workers: int | None = None,
) -> dict[int, EvalMetrics]:
    """Train a fresh model per K on K clips per class; evaluate on test."""
    res = {}
    for k in shots:
        subset = data_synth.few_shot_subset(manifest, k, seed=train_cfg.seed)
        model = OmniClip(model_cfg)
        train(model, subset, train_cfg, workers=workers)
        res[k] = evaluate(model, subset, FewShot(k), workers)

    return res


@dataclass
class ZeroShotReport:
    held_out: list[str]
    top1: list[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.top1)) if self.top1 else math.nan

    @property
    def std(self) -> float:
        return float(np.std(self.top1)) if self.top1 else math.nan


def zero_shot_report(
    model: OmniClip | Checkpoint,
    manifest: DatasetManifest,
    held_out: ty.Sequence[str],
    splits: int = 3,
    seed: int = 0,
    candidates: str = "all",
) -> ZeroShotReport:
    """Top-1 of the zero-shot protocol on `splits` seeded random halves
    of the held-out test items."""
    model = _as_model(model)
    test = manifest.split("test")
    report = ZeroShotReport(held_out=list(held_out))
    for num in range(splits):
        perm = SplitMix64(derive_seed(seed, "zero_shot", num)).permutation(len(test))
        half = sorted(test[int(p)] for p in perm[: max(1, len(test) // 2)])
        part = manifest.replace(splits={**manifest.splits, "test": half})
        metrics = evaluate(model, part, ZeroShot(tuple(held_out), candidates))
        report.top1.append(metrics.top1)

    return report
