# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Checkpoint save/load and model restore."""

from __future__ import annotations

import gzip
import logging
import typing as ty
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import coding, config, consts
from .coding import (
    CheckpointError,
    ChecksumError,
    InvalidFileError,
    TruncatedFileError,
    VersionMismatchError,
)
from .model import OmniClip
from .optim import AdamState

if ty.TYPE_CHECKING:
    from .config import ModelConfig

_LOG = logging.getLogger(__name__)

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "ChecksumError",
    "InvalidFileError",
    "MissingTensorError",
    "TruncatedFileError",
    "VersionMismatchError",
    "load_checkpoint",
    "restore_model",
    "save_checkpoint",
]


class MissingTensorError(CheckpointError):
    def __init__(self, name: str, *, frozen: bool) -> None:
        super().__init__(name)
        self.name = name
        self.frozen = frozen

    def __str__(self) -> str:
        kind = "frozen" if self.frozen else "trainable"
        return f"Checkpoint lacks {kind} tensor {self.name!r}"


@dataclass
class TensorRecord:
    data: np.ndarray
    frozen: bool


@dataclass
class Checkpoint:
    model_config: ModelConfig
    tensors: dict[str, TensorRecord]
    optimizer: AdamState = field(default_factory=AdamState)
    step: int = 0
    # batch order is a function of (seed, epoch); the seed is all we keep
    rng_state: dict[str, int] = field(default_factory=dict)
    meta: dict[str, ty.Any] = field(default_factory=dict)
    version: int = consts.CKPT_VERSION

    @property
    def vocabulary(self) -> list[str] | None:
        return self.meta.get("vocabulary")

    @property
    def classes(self) -> list[str]:
        return list(self.meta.get("classes", []))


def checkpoint_from_model(
    model: OmniClip,
    optimizer: AdamState | None = None,
    step: int = 0,
    rng_state: dict[str, int] | None = None,
    meta: dict[str, ty.Any] | None = None,
) -> Checkpoint:
    tensors = {
        name: TensorRecord(np.array(t.data, copy=True), frozen=not t.trainable)
        for name, t in model.named_parameters()
    }
    opt = optimizer or AdamState()
    return Checkpoint(
        model_config=model.config,
        tensors=tensors,
        optimizer=AdamState(
            step=opt.step,
            m={k: np.array(v, copy=True) for k, v in opt.m.items()},
            v={k: np.array(v, copy=True) for k, v in opt.v.items()},
        ),
        step=step,
        rng_state=dict(rng_state or {}),
        meta={"vocabulary": model.vocabulary, **(meta or {})},
    )


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    header = {
        "model_config": ckpt.model_config.to_dict(),
        "step": ckpt.step,
        "optimizer_step": ckpt.optimizer.step,
        "rng_state": ckpt.rng_state,
        "meta": ckpt.meta,
    }
    blobs: list[tuple[str, np.ndarray, dict[str, ty.Any]]] = [
        (name, rec.data, {"kind": "param", "frozen": rec.frozen})
        for name, rec in ckpt.tensors.items()
    ]
    for kind, moments in (("adam_m", ckpt.optimizer.m), ("adam_v", ckpt.optimizer.v)):
        blobs.extend(
            (f"{kind}:{name}", arr, {"kind": kind, "frozen": False})
            for name, arr in moments.items()
        )

    return coding.encode_container(header, blobs, ckpt.version)


def decode_checkpoint(data: bytes) -> Checkpoint:
    header, blobs = coding.decode_container(data)
    try:
        model_cfg = config.model_config_from_dict(header["model_config"])
        ckpt = Checkpoint(
            model_config=model_cfg,
            tensors={},
            optimizer=AdamState(step=int(header["optimizer_step"])),
            step=int(header["step"]),
            rng_state={k: int(v) for k, v in header["rng_state"].items()},
            meta=dict(header["meta"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidFileError(f"bad header: {exc}") from exc

    for name, (arr, entry) in blobs.items():
        match entry.get("kind"):
            case "param":
                ckpt.tensors[name] = TensorRecord(arr, frozen=bool(entry["frozen"]))
            case "adam_m":
                ckpt.optimizer.m[name.partition(":")[2]] = arr
            case "adam_v":
                ckpt.optimizer.v[name.partition(":")[2]] = arr
            case kind:
                raise InvalidFileError(f"unknown tensor kind {kind!r}")

    return ckpt


def save_checkpoint(file: Path, ckpt: Checkpoint) -> None:
    """Write checkpoint; `.gz` suffix gives a gzip-compressed file."""
    _LOG.info("write %s", file)
    data = encode_checkpoint(ckpt)
    if file.suffix == ".gz":
        data = gzip.compress(data, mtime=0)

    file.parent.mkdir(parents=True, exist_ok=True)
    file.write_bytes(data)
    _LOG.info("write %s done; %d bytes", file, len(data))


def load_checkpoint(file: Path) -> Checkpoint:
    _LOG.info("loading %s", file)
    data = file.read_bytes()
    if file.suffix == ".gz":
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise TruncatedFileError(0, len(data)) from exc

    return decode_checkpoint(data)


def restore_model(
    ckpt: Checkpoint, *, allow_reinit_frozen: bool = False
) -> OmniClip:
    """Build the model described by `ckpt` and load its tensors.

    A frozen tensor absent from the checkpoint keeps its seeded init only
    when `allow_reinit_frozen` is set.
    """
    model = OmniClip(ckpt.model_config, corpus=ckpt.vocabulary)
    params = dict(model.named_parameters())

    if unknown := set(ckpt.tensors) - set(params):
        raise InvalidFileError(f"unexpected tensors {sorted(unknown)[:3]}")

    for name, tensor in params.items():
        rec = ckpt.tensors.get(name)
        if rec is None:
            if tensor.trainable or not allow_reinit_frozen:
                raise MissingTensorError(name, frozen=not tensor.trainable)

            _LOG.warning("tensor %s missing; using seeded init", name)
            continue

        if rec.data.shape != tensor.shape:
            raise InvalidFileError(
                f"tensor {name}: shape {rec.data.shape} != {tensor.shape}"
            )

        tensor.data = np.array(rec.data, dtype=tensor.dtype, copy=True)

    model.clear_text_cache()
    return model
