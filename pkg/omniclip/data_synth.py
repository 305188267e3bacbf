# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# ruff: noqa: PLR2004

"""Procedural moving-shape videos and dataset manifests.

Each video shows one bright object on a dark canvas. The object moves
linearly (motion class) and grows or shrinks linearly (scale class). The
canvas is periodic: an object leaving one edge re-enters at the opposite
one. The start is uniform over the canvas and the initial radius and
shape are drawn independently of the class, so every single frame has
the same distribution for every motion.

Manifests keep only generation parameters; pixels are regenerated on
demand and regeneration is bit-exact.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import typing as ty
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import consts
from .numerics import SplitMix64, derive_seed

if ty.TYPE_CHECKING:
    from .config import RunConfig

_LOG = logging.getLogger(__name__)

# start positions and radii snap to this grid so trajectories are exact
_GRID: ty.Final = 16.0
_RADIUS_RANGE: ty.Final = (2.0, 3.0)

SPLITS: ty.Final = ("train", "val", "test")


class TrajectoryError(ValueError):
    def __init__(self, spec: SynthVideoSpec, reason: str) -> None:
        super().__init__(reason)
        self.spec = spec
        self.reason = reason

    def __str__(self) -> str:
        return (
            f"object does not fit {self.spec.canvas}px canvas: {self.reason} "
            f"(speed={self.spec.speed}, frames={self.spec.frames})"
        )


class SplitError(ValueError):
    def __init__(self, msg: str) -> None:
        super().__init__(msg)
        self.msg = msg

    def __str__(self) -> str:
        return self.msg


class ManifestError(ValueError):
    def __init__(self, msg: str) -> None:
        super().__init__(msg)
        self.msg = msg

    def __str__(self) -> str:
        return f"invalid manifest: {self.msg}"


@dataclass(frozen=True)
class SynthVideoSpec:
    shape: str = "square"
    motion: str = "right"
    scale: str = "constant"
    canvas: int = 32
    frames: int = 8
    channels: int = 3
    speed: float = 1.0
    scale_rate: float = 0.5
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.shape not in consts.SHAPES:
            raise ValueError(self.shape)

        if self.motion not in consts.MOTIONS:
            raise ValueError(self.motion)

        if self.scale not in consts.SCALES:
            raise ValueError(self.scale)

        if self.canvas < 1 or self.frames < 1 or self.channels < 1:
            raise ValueError("canvas, frames and channels must be positive")

        if self.speed < 0 or self.scale_rate < 0 or self.noise < 0:
            raise ValueError("speed, scale_rate and noise must be >= 0")

    def to_dict(self) -> dict[str, ty.Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls: type[SynthVideoSpec], data: dict[str, ty.Any]) -> SynthVideoSpec:
        known = {f.name for f in dataclasses.fields(cls)}
        if unknown := set(data) - known:
            raise ManifestError(f"unknown spec keys {sorted(unknown)}")

        return cls(**data)


@dataclass
class SynthVideo:
    """Pixels [T, C, H, W] in [0, 1] and the object trajectory."""

    pixels: np.ndarray
    # (x, y) per frame
    centers: np.ndarray
    radii: np.ndarray


def _snap(value: float) -> float:
    return math.floor(value * _GRID) / _GRID


def _radii(spec: SynthVideoSpec, r0: float) -> np.ndarray:
    steps = np.arange(spec.frames, dtype=np.float64)
    span = spec.scale_rate * (spec.frames - 1)
    match spec.scale:
        case "grow":
            return r0 + spec.scale_rate * steps
        case "shrink":
            return r0 + spec.scale_rate * steps[::-1]

    return np.full(spec.frames, r0 + span / 2)


def _direction(motion: str) -> tuple[float, float]:
    # image y axis points down
    return {
        "up": (0.0, -1.0),
        "down": (0.0, 1.0),
        "left": (-1.0, 0.0),
        "right": (1.0, 0.0),
        "static": (0.0, 0.0),
    }[motion]


def start_box(spec: SynthVideoSpec) -> tuple[float, float]:
    """Range of start coordinates (both axes); the whole canvas for every
    class. Raises when the object and its path do not fit the canvas."""
    rmax = _RADIUS_RANGE[1] + spec.scale_rate * (spec.frames - 1)
    travel = spec.speed * (spec.frames - 1)
    if travel + 2 * rmax > spec.canvas:
        raise TrajectoryError(
            spec, f"path {travel} plus object {2 * rmax} exceeds {spec.canvas}"
        )

    return 0.0, float(spec.canvas)


def trajectory(spec: SynthVideoSpec) -> tuple[np.ndarray, np.ndarray]:
    """Centers [T, 2] and radii [T] drawn from the spec seed.

    Centers are not wrapped; the canvas is periodic and `wrap` maps them
    onto it. With a uniform start every frame's position is uniform on
    the canvas, whatever the motion.
    """
    low, high = start_box(spec)
    rng = SplitMix64(derive_seed(spec.seed, "trajectory"))
    r0 = _snap(rng.uniform((1,), *_RADIUS_RANGE)[0])
    start = np.array([_snap(v) for v in rng.uniform((2,), low, high)])

    dx, dy = _direction(spec.motion)
    steps = np.arange(spec.frames, dtype=np.float64)[:, np.newaxis]
    centers = start + spec.speed * steps * np.array([dx, dy])
    return centers, _radii(spec, r0)


def wrap(centers: np.ndarray, canvas: int) -> np.ndarray:
    return np.mod(centers, canvas)


def _mask(shape: str, canvas: int, cx: float, cy: float, radius: float) -> np.ndarray:
    coords = np.arange(canvas, dtype=np.float64) + 0.5
    # periodic distance
    dx = np.abs(coords[np.newaxis, :] - cx)
    dx = np.minimum(dx, canvas - dx)
    dy = np.abs(coords[:, np.newaxis] - cy)
    dy = np.minimum(dy, canvas - dy)
    match shape:
        case "disc":
            return dx * dx + dy * dy <= radius * radius
        case "cross":
            arm = radius / 3
            return ((dx <= radius) & (dy <= arm)) | ((dy <= radius) & (dx <= arm))

    return (dx <= radius) & (dy <= radius)


def generate_video(spec: SynthVideoSpec) -> SynthVideo:
    centers, radii = trajectory(spec)
    frames = np.stack(
        [
            _mask(spec.shape, spec.canvas, cx, cy, r).astype(np.float64)
            for (cx, cy), r in zip(
                wrap(centers, spec.canvas), radii, strict=True
            )
        ]
    )
    if spec.noise > 0:
        rng = SplitMix64(derive_seed(spec.seed, "noise"))
        frames = np.clip(frames + rng.normal(frames.shape, std=spec.noise), 0.0, 1.0)

    pixels = np.repeat(frames[:, np.newaxis], spec.channels, axis=1)
    return SynthVideo(pixels=pixels, centers=centers, radii=radii)


def class_names(label_map: str) -> list[str]:
    match label_map:
        case "motion_only":
            return list(consts.MOTION_CLASSES)
        case "scale_only":
            return list(consts.SCALES)
        case "joint":
            return [f"{m} {s}" for m in consts.MOTION_CLASSES for s in consts.SCALES]

    raise ValueError(label_map)


@dataclass
class ManifestItem:
    spec: SynthVideoSpec
    label: int


@dataclass
class VideoBatch:
    pixels: np.ndarray
    labels: np.ndarray
    # manifest indices of the items
    items: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, idx: ty.Sequence[int] | np.ndarray) -> VideoBatch:
        sel = np.asarray(idx, dtype=np.int64)
        return VideoBatch(
            pixels=self.pixels[sel],
            labels=self.labels[sel],
            items=[self.items[i] for i in sel] if self.items else [],
        )


@dataclass
class DatasetManifest:
    label_map: str
    seed: int
    items: list[ManifestItem]
    splits: dict[str, list[int]]
    held_out: list[str] = field(default_factory=list)
    version: int = consts.MANIFEST_VERSION

    @property
    def classes(self) -> list[str]:
        return class_names(self.label_map)

    def split(self, name: str) -> list[int]:
        try:
            return self.splits[name]
        except KeyError:
            raise SplitError(f"unknown split {name!r}") from None

    def labels(self, split: str) -> np.ndarray:
        return np.array(
            [self.items[idx].label for idx in self.split(split)], dtype=np.int64
        )

    def class_counts(self, split: str) -> list[int]:
        counts = [0] * len(self.classes)
        for label in self.labels(split):
            counts[label] += 1

        return counts

    def replace(self, **changes: ty.Any) -> DatasetManifest:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, ty.Any]:
        return {
            "version": self.version,
            "seed": self.seed,
            "label_map": self.label_map,
            "held_out": list(self.held_out),
            "specs": [
                {**item.spec.to_dict(), "label": item.label} for item in self.items
            ],
            "splits": {name: list(idx) for name, idx in self.splits.items()},
        }

    @classmethod
    def from_dict(
        cls: type[DatasetManifest], doc: dict[str, ty.Any]
    ) -> DatasetManifest:
        try:
            version = doc["version"]
            if version != consts.MANIFEST_VERSION:
                raise ManifestError(f"unsupported version {version}")

            items = []
            for entry in doc["specs"]:
                data = dict(entry)
                label = int(data.pop("label"))
                items.append(ManifestItem(SynthVideoSpec.from_dict(data), label))

            manifest = cls(
                label_map=doc["label_map"],
                seed=int(doc["seed"]),
                items=items,
                splits={k: [int(i) for i in v] for k, v in doc["splits"].items()},
                held_out=list(doc.get("held_out", [])),
            )
        except (KeyError, TypeError) as err:
            raise ManifestError(f"missing or bad field: {err}") from err

        validate_manifest(manifest)
        return manifest


def validate_manifest(manifest: DatasetManifest) -> None:
    if manifest.label_map not in consts.LABEL_MAPS:
        raise ManifestError(f"unknown label map {manifest.label_map!r}")

    num_classes = len(manifest.classes)
    seen: set[int] = set()
    for name, idx in manifest.splits.items():
        if name not in SPLITS:
            raise ManifestError(f"unknown split {name!r}")

        if dup := seen & set(idx):
            raise SplitError(f"split {name} overlaps others at {sorted(dup)[:5]}")

        seen.update(idx)
        if any(not 0 <= i < len(manifest.items) for i in idx):
            raise ManifestError(f"split {name} index out of range")

    for item in manifest.items:
        if not 0 <= item.label < num_classes:
            raise ManifestError(f"label {item.label} out of range")

    if unknown := set(manifest.held_out) - set(manifest.classes):
        raise ManifestError(f"unknown held-out classes {sorted(unknown)}")


def make_dataset(  # noqa: PLR0913
    label_map: str,
    n_per_class: int,
    seed: int,
    *,
    canvas: int = 32,
    frames: int = 8,
    channels: int = 3,
    speed: float = 1.0,
    scale_rate: float = 0.5,
    noise: float = 0.05,
    val_fraction: float = 0.25,
    test_fraction: float = 0.25,
) -> DatasetManifest:
    """Balanced dataset: `n_per_class` items per class, split per class."""
    if n_per_class < 1:
        raise ValueError(n_per_class)

    names = class_names(label_map)
    items: list[ManifestItem] = []
    for label, name in enumerate(names):
        for idx in range(n_per_class):
            gidx = label * n_per_class + idx
            # nuisance factors drawn independently of the class
            rng = SplitMix64(derive_seed(seed, "nuisance", gidx))
            shape = consts.SHAPES[rng.randint(0, len(consts.SHAPES))]
            motion = rng.randint(0, len(consts.MOTIONS))
            scale = rng.randint(0, len(consts.SCALES))
            match label_map:
                case "motion_only":
                    motion_name, scale_name = name, consts.SCALES[scale]
                case "scale_only":
                    motion_name, scale_name = consts.MOTIONS[motion], name
                case _:
                    motion_name, scale_name = name.split()

            spec = SynthVideoSpec(
                shape=shape,
                motion=motion_name,
                scale=scale_name,
                canvas=canvas,
                frames=frames,
                channels=channels,
                speed=speed,
                scale_rate=scale_rate,
                noise=noise,
                seed=derive_seed(seed, "item", gidx),
            )
            start_box(spec)
            items.append(ManifestItem(spec, label))

    n_test = int(n_per_class * test_fraction)
    n_val = int(n_per_class * val_fraction)
    splits: dict[str, list[int]] = {name: [] for name in SPLITS}
    for label in range(len(names)):
        perm = SplitMix64(derive_seed(seed, "split", label)).permutation(n_per_class)
        base = label * n_per_class
        ordered = [base + int(p) for p in perm]
        splits["test"].extend(ordered[:n_test])
        splits["val"].extend(ordered[n_test : n_test + n_val])
        splits["train"].extend(ordered[n_test + n_val :])

    splits = {name: sorted(idx) for name, idx in splits.items()}
    _LOG.info(
        "dataset %s: %d items, train/val/test %d/%d/%d",
        label_map,
        len(items),
        len(splits["train"]),
        len(splits["val"]),
        len(splits["test"]),
    )
    return DatasetManifest(label_map=label_map, seed=seed, items=items, splits=splits)


def dataset_from_config(cfg: RunConfig) -> DatasetManifest:
    data = cfg.data
    manifest = make_dataset(
        data.label_map,
        data.n_per_class,
        data.seed,
        canvas=cfg.model.image_size,
        frames=cfg.model.frames,
        channels=cfg.model.channels,
        speed=data.speed,
        scale_rate=data.scale_rate,
        noise=data.noise,
        val_fraction=data.val_fraction,
        test_fraction=data.test_fraction,
    )
    if data.held_out:
        manifest = held_out_split(manifest, data.held_out)

    return manifest


def few_shot_subset(
    manifest: DatasetManifest, k: int, seed: int | None = None
) -> DatasetManifest:
    """Keep exactly `k` training items per class; val and test unchanged."""
    train = manifest.split("train")
    by_class: dict[int, list[int]] = {}
    for idx in train:
        by_class.setdefault(manifest.items[idx].label, []).append(idx)

    seed = manifest.seed if seed is None else seed
    selected: list[int] = []
    for label, name in enumerate(manifest.classes):
        members = by_class.get(label, [])
        if name in manifest.held_out and not members:
            continue

        if not 1 <= k <= len(members):
            raise SplitError(
                f"{k}-shot needs {k} training items of {name!r}, have {len(members)}"
            )

        if k == len(members):
            selected.extend(members)
            continue

        perm = SplitMix64(derive_seed(seed, "few_shot", k, label)).permutation(
            len(members)
        )
        selected.extend(members[int(p)] for p in perm[:k])

    splits = dict(manifest.splits)
    splits["train"] = sorted(selected)
    return manifest.replace(splits=splits)


def held_out_split(
    manifest: DatasetManifest, held_out: ty.Sequence[str]
) -> DatasetManifest:
    """Zero-shot split: held-out classes leave train and val; test holds
    every item of the held-out classes."""
    names = manifest.classes
    if unknown := set(held_out) - set(names):
        raise SplitError(f"unknown held-out classes {sorted(unknown)}")

    if not held_out or len(set(held_out)) >= len(names):
        raise SplitError("held-out classes must be a non-empty proper subset")

    hidden = {names.index(n) for n in held_out}

    def keep(idx: int) -> bool:
        return manifest.items[idx].label not in hidden

    splits = {
        "train": [i for i in manifest.split("train") if keep(i)],
        "val": [i for i in manifest.splits.get("val", []) if keep(i)],
        "test": [i for i in range(len(manifest.items)) if not keep(i)],
    }
    return manifest.replace(splits=splits, held_out=list(held_out))


def render(
    manifest: DatasetManifest,
    split: str | ty.Sequence[int],
    workers: int | None = None,
) -> VideoBatch:
    """Regenerate pixels of a split (or explicit item list) as one batch."""
    idx = manifest.split(split) if isinstance(split, str) else list(split)
    specs = [manifest.items[i].spec for i in idx]
    if workers and workers > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            videos = list(pool.map(generate_video, specs))
    else:
        videos = [generate_video(spec) for spec in specs]

    if videos:
        pixels = np.stack([v.pixels for v in videos])
    else:
        spec = manifest.items[0].spec if manifest.items else SynthVideoSpec()
        pixels = np.zeros(
            (0, spec.frames, spec.channels, spec.canvas, spec.canvas)
        )

    labels = np.array([manifest.items[i].label for i in idx], dtype=np.int64)
    return VideoBatch(pixels=pixels, labels=labels, items=idx)


def save_manifest(file: Path, manifest: DatasetManifest) -> None:
    _LOG.info("saving manifest %s", file)
    file.parent.mkdir(parents=True, exist_ok=True)
    with file.open("w", encoding="utf-8") as fout:
        json.dump(manifest.to_dict(), fout, indent=1, sort_keys=True)


def load_manifest(file: Path) -> DatasetManifest:
    _LOG.info("loading manifest %s", file)
    with file.open(encoding="utf-8") as fin:
        try:
            doc = json.load(fin)
        except json.JSONDecodeError as exc:
            raise ManifestError(exc.msg) from exc

    if not isinstance(doc, dict):
        raise ManifestError("expected JSON object")

    return DatasetManifest.from_dict(doc)
