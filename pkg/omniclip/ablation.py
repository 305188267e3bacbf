# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Ablation suites: each cell trains a fresh model with the same seed and
training recipe and is evaluated on the supervised test split."""

from __future__ import annotations

import csv
import logging
import typing as ty
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import consts, costs, data_synth
from .config import RunConfig, ratio_label
from .evaluate import evaluate
from .model import OmniClip
from .train import train

if ty.TYPE_CHECKING:
    from .config import ModelConfig
    from .data_synth import DatasetManifest

_LOG = logging.getLogger(__name__)

METRIC_COLUMNS: ty.Final = ("top1", "top5", "trainable_params", "gflops")


class SuiteError(ValueError):
    def __init__(self, suite: str) -> None:
        super().__init__(suite)
        self.suite = suite

    def __str__(self) -> str:
        return (
            f"unknown ablation suite {self.suite!r}; "
            f"expected one of {', '.join(consts.ABLATION_SUITES)}"
        )


@dataclass
class AblationCell:
    labels: dict[str, ty.Any]
    model: ModelConfig


@dataclass
class AblationTable:
    suite: str
    columns: list[str]
    rows: list[dict[str, ty.Any]] = field(default_factory=list)


def location_masks(depth: int) -> list[tuple[list[int], int]]:
    """(groups enabled, block bitmask) for 0..4 groups of blocks, first
    groups first."""
    groups = np.array_split(np.arange(depth), consts.LOCATION_GROUPS)
    res = []
    for count in range(consts.LOCATION_GROUPS + 1):
        mask = 0
        for grp in groups[:count]:
            for blk in grp:
                mask |= 1 << int(blk)

        res.append((list(range(count)), mask))

    return res


def suite_cells(suite: str, base: ModelConfig) -> list[AblationCell]:
    match suite:
        case "modules":
            return [
                AblationCell(
                    {"pta": int(pta), "spg": int(spg)},
                    base.replace(pta_enabled=pta, spg_enabled=spg),
                )
                for pta, spg in (
                    (False, False),
                    (True, False),
                    (False, True),
                    (True, True),
                )
            ]
        case "ratio":
            return [
                AblationCell(
                    {"ratio": ratio_label(ratio)}, base.replace(pta_ratio=ratio)
                )
                for ratio in consts.ABLATION_RATIOS
            ]
        case "locations":
            cells = []
            for groups, mask in location_masks(base.depth):
                labels = {
                    f"group{grp + 1}": int(grp in groups)
                    for grp in range(consts.LOCATION_GROUPS)
                }
                cells.append(
                    AblationCell(
                        labels,
                        base.replace(pta_enabled=mask != 0, pta_layers=mask or None),
                    )
                )

            return cells
        case "variants":
            return [
                AblationCell({"variant": variant}, base.replace(variant=variant))
                for variant in consts.VARIANTS
            ]
        case "pooling":
            return [
                AblationCell(
                    {"pooling": pooling, "projector": int(projector)},
                    base.replace(spg_pooling=pooling, spg_projector=projector),
                )
                for pooling in consts.POOLING_MODES
                for projector in (False, True)
            ]

    raise SuiteError(suite)


def run_ablation(
    suite: str,
    base: RunConfig,
    seed: int | None = None,
    *,
    task: str | None = None,
    manifest: DatasetManifest | None = None,
    workers: int | None = None,
) -> AblationTable:
    """Train and evaluate every cell of `suite` on one shared dataset."""
    if seed is not None:
        base = base.with_seed(seed)

    if task is not None:
        base = RunConfig(
            model=base.model,
            train=base.train,
            data=base.data.replace(label_map=task),
        )

    cells = suite_cells(suite, base.model)
    if manifest is None:
        manifest = data_synth.dataset_from_config(base)

    table = AblationTable(
        suite=suite,
        columns=[*cells[0].labels, *METRIC_COLUMNS],
    )
    for cell in cells:
        _LOG.info("ablation %s cell %s", suite, cell.labels)
        model = OmniClip(cell.model)
        train(model, manifest, base.train, workers=workers)
        metrics = evaluate(model, manifest, workers=workers)
        report = costs.cost_report(cell.model, len(model.text.vocabulary))
        table.rows.append(
            {
                **cell.labels,
                "top1": metrics.top1,
                "top5": metrics.top5,
                "trainable_params": report.trainable,
                "gflops": report.gflops,
            }
        )

    return table


def write_csv(file: Path, table: AblationTable) -> None:
    _LOG.info("write %s", file)
    file.parent.mkdir(parents=True, exist_ok=True)
    with file.open("w", encoding="utf-8", newline="") as out:
        writer = csv.DictWriter(
            out,
            fieldnames=table.columns,
            quoting=csv.QUOTE_NONNUMERIC,
            extrasaction="ignore",
        )
        writer.writeheader()
        writer.writerows(table.rows)
