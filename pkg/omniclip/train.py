# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Training loop.

Only trainable parameters reach the optimizer; the frozen backbone and
text tower never change. Batch order is a seeded permutation per epoch,
so a run is a pure function of (model init, manifest, config) and can be
resumed from a checkpoint at any step.
"""

from __future__ import annotations

import json
import logging
import math
import typing as ty
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data_synth, optim
from .ckpt_io import Checkpoint, checkpoint_from_model
from .model import OmniClip, encoder, objective
from .numerics import NonFiniteError, SplitMix64, backward, derive_seed, no_grad

if ty.TYPE_CHECKING:
    from .config import TrainConfig
    from .data_synth import DatasetManifest, VideoBatch

_LOG = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    def __init__(
        self, step: int, lr: float, last_loss: float | None, reason: str
    ) -> None:
        super().__init__(step, lr, last_loss, reason)
        self.step = step
        self.lr = lr
        self.last_loss = last_loss
        self.reason = reason

    def __str__(self) -> str:
        last = "none" if self.last_loss is None else f"{self.last_loss:.6g}"
        return (
            f"training aborted at step {self.step} (lr={self.lr:.3g}, "
            f"last finite loss {last}): {self.reason}"
        )


@dataclass
class TrainResult:
    model: OmniClip
    checkpoint: Checkpoint
    log: list[dict[str, ty.Any]] = field(default_factory=list)

    def losses(self) -> list[float]:
        return [rec["loss"] for rec in self.log if rec["event"] == "step"]


class MetricsLog:
    """JSON-lines metrics stream, mirrored in memory."""

    def __init__(self, path: Path | None = None) -> None:
        self.records: list[dict[str, ty.Any]] = []
        self._path = path
        if path:
            path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, event: str, **fields: ty.Any) -> None:
        rec = {"event": event, **fields}
        self.records.append(rec)
        if self._path:
            with self._path.open("a", encoding="utf-8") as out:
                out.write(json.dumps(rec, sort_keys=True))
                out.write("\n")


def steps_per_epoch(num_items: int, batch_size: int) -> int:
    return max(1, math.ceil(num_items / batch_size))


def batch_order(seed: int, epoch: int, num_items: int) -> np.ndarray:
    return SplitMix64(derive_seed(seed, "epoch", epoch)).permutation(num_items)


def seen_classes(manifest: DatasetManifest) -> tuple[list[str], np.ndarray]:
    """Classes available for training and the label -> seen index map
    (-1 for held-out classes)."""
    names = manifest.classes
    seen = [name for name in names if name not in manifest.held_out]
    remap = np.array(
        [seen.index(name) if name in seen else -1 for name in names],
        dtype=np.int64,
    )
    return seen, remap


def _accuracy(
    model: OmniClip, batch: VideoBatch, names: list[str], remap: np.ndarray
) -> float:
    labels = remap[batch.labels]
    with no_grad():
        sims = model.predict(batch, names)

    return objective.top_k_accuracy(sims, labels, 1)


def train_step(
    model: OmniClip,
    opt: optim.AdamW,
    pixels: np.ndarray,
    labels: np.ndarray,
    class_names: list[str],
    lr: float,
) -> tuple[float, float]:
    """One optimizer step; returns (loss, batch top-1)."""
    opt.zero_grad()
    feats = encoder.encode_video(model.encoder, pixels)
    sims = objective.similarity_matrix(feats, model.class_features(class_names))
    loss = objective.classification_loss(sims, labels, model.head)
    backward(loss, opt.params.values())
    opt.step(lr)
    return loss.item(), objective.top_k_accuracy(sims, labels, 1)


def train(  # noqa: PLR0914
    model: OmniClip,
    manifest: DatasetManifest,
    cfg: TrainConfig,
    *,
    resume: Checkpoint | None = None,
    metrics_path: Path | None = None,
    workers: int | None = None,
) -> TrainResult:
    """Train `model` in place on the manifest's train split.

    With `resume` the model must already hold the checkpoint tensors
    (see `ckpt_io.restore_model`); optimizer moments and the step counter
    are taken from it.
    """
    model.head.label_smoothing = cfg.label_smoothing
    names, remap = seen_classes(manifest)
    train_batch = data_synth.render(manifest, "train", workers)
    if not len(train_batch):
        raise TrainingError(0, 0.0, None, "empty train split")

    val_batch = data_synth.render(manifest, "val", workers)
    labels = remap[train_batch.labels]

    params = model.trainable_parameters()
    opt_state = None
    start = 0
    if resume is not None:
        opt_state = optim.AdamState(
            step=resume.optimizer.step,
            m={k: np.array(v, copy=True) for k, v in resume.optimizer.m.items()},
            v={k: np.array(v, copy=True) for k, v in resume.optimizer.v.items()},
        )
        start = resume.step

    opt = optim.AdamW(
        params,
        betas=cfg.betas,
        eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
        state=opt_state,
    )

    spe = steps_per_epoch(len(train_batch), cfg.batch_size)
    total = cfg.epochs * spe
    stop = total if cfg.max_steps is None else min(total, cfg.max_steps)
    metrics = MetricsLog(metrics_path)
    _LOG.info(
        "training %d trainable tensors; steps %d..%d of %d (%d per epoch)",
        len(params),
        start,
        stop,
        total,
        spe,
    )

    last_loss: float | None = None
    epoch_losses: list[float] = []
    for step in range(start, stop):
        epoch, pos = divmod(step, spe)
        order = batch_order(cfg.seed, epoch, len(train_batch))
        idx = order[pos * cfg.batch_size : (pos + 1) * cfg.batch_size]
        lr = optim.lr_at(step, cfg, spe)
        try:
            loss, top1 = train_step(
                model, opt, train_batch.pixels[idx], labels[idx], names, lr
            )
        except NonFiniteError as exc:
            raise TrainingError(step, lr, last_loss, str(exc)) from exc

        if not math.isfinite(loss):
            raise TrainingError(step, lr, last_loss, "non-finite loss")

        last_loss = loss
        epoch_losses.append(loss)
        metrics.write("step", step=step, epoch=epoch, lr=lr, loss=loss, top1=top1)

        if pos == spe - 1:
            val = _accuracy(model, val_batch, names, remap) if len(val_batch) else None
            mean_loss = float(np.mean(epoch_losses))
            _LOG.info(
                "epoch %d: loss %.4f val top1 %s", epoch, mean_loss, val
            )
            metrics.write(
                "epoch", step=step, epoch=epoch, loss=mean_loss, val_top1=val
            )
            epoch_losses = []

    metrics.write("done", step=stop, loss=last_loss)
    ckpt = checkpoint_from_model(
        model,
        opt.state,
        step=max(stop, start),
        rng_state={"seed": cfg.seed},
        meta={"classes": names, "train_config": cfg.to_dict()},
    )
    return TrainResult(model=model, checkpoint=ckpt, log=metrics.records)
