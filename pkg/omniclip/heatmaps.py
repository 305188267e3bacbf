# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Export of class-token attention maps as CSV and 8-bit PGM files."""

from __future__ import annotations

import csv
import json
import logging
import typing as ty
from pathlib import Path

import numpy as np

from . import data_synth
from .ckpt_io import Checkpoint, restore_model
from .model import OmniClip, attention_heatmap

if ty.TYPE_CHECKING:
    from .data_synth import DatasetManifest
    from .model import AttentionMap

_LOG = logging.getLogger(__name__)


def write_pgm(file: Path, image: np.ndarray) -> None:
    """Binary (P5) greyscale image; `image` is uint8 [rows, cols]."""
    if image.ndim != 2 or image.dtype != np.uint8:  # noqa: PLR2004
        raise ValueError("expected 2-d uint8 image")

    rows, cols = image.shape
    with file.open("wb") as out:
        out.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        out.write(np.ascontiguousarray(image).tobytes())


def read_pgm(file: Path) -> np.ndarray:
    data = file.read_bytes()
    magic, size, maxval, raw = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError("not an 8-bit P5 file")

    cols, rows = (int(v) for v in size.split())
    return np.frombuffer(raw, dtype=np.uint8).reshape((rows, cols))


def write_csv(file: Path, values: np.ndarray) -> None:
    with file.open("w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out)
        writer.writerows([repr(float(v)) for v in row] for row in values)


def to_gray(values: np.ndarray) -> np.ndarray:
    """Min-max normalise over the whole array to 0..255."""
    low, high = float(values.min()), float(values.max())
    if high <= low:
        return np.zeros(values.shape, dtype=np.uint8)

    scaled = (values - low) / (high - low) * 255.0
    return np.rint(scaled).astype(np.uint8)


def frame_to_gray(frame: np.ndarray) -> np.ndarray:
    """Channel 0 of a [C, H, W] frame in [0, 1]."""
    return np.rint(np.clip(frame[0], 0.0, 1.0) * 255.0).astype(np.uint8)


def baseline_model(model: OmniClip) -> OmniClip:
    """Frozen image pipeline of `model`: no prompts, no adapters."""
    cfg = model.config.replace(spg_enabled=False, pta_enabled=False)
    base = OmniClip(cfg, corpus=model.vocabulary)
    params = dict(model.named_parameters())
    for name, tensor in base.named_parameters():
        if (src := params.get(name)) is not None and src.shape == tensor.shape:
            tensor.data = np.array(src.data, copy=True)

    return base


def _export_item(
    amap: AttentionMap,
    pixels: np.ndarray,
    prefix: str,
    out_dir: Path,
    sidecar: dict[str, ty.Any],
) -> list[Path]:
    files = []
    grid = amap.grid[0]
    gray = to_gray(grid)
    for frame in range(grid.shape[0]):
        stem = f"{prefix}_t{frame:02d}"
        csv_file = out_dir / f"{stem}_attn.csv"
        write_csv(csv_file, grid[frame])
        pgm_file = out_dir / f"{stem}_attn.pgm"
        write_pgm(pgm_file, gray[frame])
        raw_file = out_dir / f"{stem}_frame.pgm"
        write_pgm(raw_file, frame_to_gray(pixels[frame]))
        files.extend((csv_file, pgm_file, raw_file))

    meta_file = out_dir / f"{prefix}_meta.json"
    meta = {
        **sidecar,
        "layer": amap.layer,
        "grid": list(grid.shape[1:]),
        "mass": amap.mass[0].tolist(),
        "row_sums": amap.rows[0].sum(axis=-1).tolist(),
    }
    with meta_file.open("w", encoding="utf-8") as out:
        json.dump(meta, out, indent=1, sort_keys=True)

    files.append(meta_file)
    return files


def export_heatmaps(  # noqa: PLR0913
    model: OmniClip | Checkpoint,
    manifest: DatasetManifest,
    items: ty.Sequence[int],
    layer: int,
    out_dir: Path,
    *,
    baseline: bool = False,
) -> list[Path]:
    """Write per-frame attention maps (CSV, PGM), raw frames (PGM) and a
    JSON sidecar per item. With `baseline` the same maps of the frozen
    image pipeline are written with a `vanilla_` prefix."""
    if isinstance(model, Checkpoint):
        model = restore_model(model)

    models = [("", model)]
    if baseline:
        models.append(("vanilla_", baseline_model(model)))

    out_dir.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    for idx in items:
        if not 0 <= idx < len(manifest.items):
            raise IndexError(idx)

        item = manifest.items[idx]
        pixels = data_synth.generate_video(item.spec).pixels
        for prefix, mdl in models:
            amap = attention_heatmap(mdl.encoder, pixels, layer)
            sidecar = {
                "item": idx,
                "label": item.label,
                "class": manifest.classes[item.label],
                "baseline": bool(prefix),
            }
            files.extend(
                _export_item(amap, pixels, f"{prefix}item{idx:04d}", out_dir, sidecar)
            )

    _LOG.info("wrote %d heatmap files to %s", len(files), out_dir)
    return files
