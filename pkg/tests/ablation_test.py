# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# pylint: disable=protected-access,unspecified-encoding,consider-using-with
# mypy: allow-untyped-defs, allow-untyped-calls
# ruff: noqa: SLF001,PLR2004

""" """

import csv

import numpy as np
import pytest

from omniclip import ablation
from omniclip.config import DataConfig, ModelConfig, RunConfig


@pytest.mark.parametrize(
    ("suite", "rows"),
    [
        ("modules", 4),
        ("ratio", 4),
        ("locations", 5),
        ("variants", 3),
        ("pooling", 4),
    ],
)
def test_suite_sizes(suite, rows):
    assert len(ablation.suite_cells(suite, ModelConfig())) == rows


def test_unknown_suite():
    with pytest.raises(ablation.SuiteError) as err:
        ablation.suite_cells("dropout", ModelConfig())

    assert "modules" in str(err.value)


def test_modules_cells():
    cells = ablation.suite_cells("modules", ModelConfig())
    flags = [(c.model.pta_enabled, c.model.spg_enabled) for c in cells]
    assert flags == [(False, False), (True, False), (False, True), (True, True)]
    assert cells[1].labels == {"pta": 1, "spg": 0}


def test_ratio_cells():
    cells = ablation.suite_cells("ratio", ModelConfig())
    assert [c.labels["ratio"] for c in cells] == ["1/8", "1/4", "1/2", "1"]
    assert [c.model.bottleneck for c in cells] == [8, 16, 32, 64]


def test_location_masks():
    assert [mask for _, mask in ablation.location_masks(4)] == [0, 1, 3, 7, 15]
    assert [mask for _, mask in ablation.location_masks(12)] == [
        0,
        0b111,
        0b111111,
        0b111111111,
        0b111111111111,
    ]
    assert ablation.location_masks(4)[2][0] == [0, 1]


def test_location_cells():
    cells = ablation.suite_cells("locations", ModelConfig(depth=4))
    assert not cells[0].model.pta_enabled
    assert cells[0].model.adapted_blocks() == []
    assert cells[2].model.adapted_blocks() == [0, 1]
    assert cells[4].model.adapted_blocks() == [0, 1, 2, 3]
    assert cells[2].labels == {"group1": 1, "group2": 1, "group3": 0, "group4": 0}


def test_pooling_cells():
    cells = ablation.suite_cells("pooling", ModelConfig())
    assert {(c.model.spg_pooling, c.model.spg_projector) for c in cells} == {
        ("avg", False),
        ("avg", True),
        ("max", False),
        ("max", True),
    }


def test_write_csv(tmp_path):
    table = ablation.AblationTable(
        suite="variants",
        columns=["variant", "top1"],
        rows=[
            {"variant": "cascade", "top1": 0.5},
            {"variant": "block_parallel", "top1": 0.75},
        ],
    )
    file = tmp_path / "sub" / "ablation.csv"
    ablation.write_csv(file, table)
    with file.open(encoding="utf-8", newline="") as inp:
        rows = list(csv.reader(inp, quoting=csv.QUOTE_NONNUMERIC))

    assert rows == [
        ["variant", "top1"],
        ["cascade", 0.5],
        ["block_parallel", 0.75],
    ]


@pytest.mark.slow
def test_run_variants(micro_config, tiny_manifest, quick_train):
    base = RunConfig(
        model=micro_config,
        train=quick_train.replace(epochs=1, warmup_epochs=0),
        data=DataConfig(n_per_class=4),
    )
    table = ablation.run_ablation("variants", base, manifest=tiny_manifest)
    assert table.columns == ["variant", "top1", "top5", "trainable_params", "gflops"]
    assert [row["variant"] for row in table.rows] == [
        "block_parallel",
        "attention_parallel",
        "cascade",
    ]
    # same parameters, same cost for every variant
    assert len({row["trainable_params"] for row in table.rows}) == 1
    assert all(0.0 <= row["top1"] <= 1.0 for row in table.rows)


def _cell(table, **labels):
    for row in table.rows:
        if all(row[key] == value for key, value in labels.items()):
            return row

    raise KeyError(labels)


@pytest.mark.slow
def test_motion_needs_temporal_adapter():
    # 64 train clips per class, default model and recipe
    table = ablation.run_ablation("modules", RunConfig(), seed=0)
    full = _cell(table, pta=1, spg=1)["top1"]
    without_pta = _cell(table, pta=0, spg=1)["top1"]
    assert full >= 0.95
    assert without_pta <= full - 0.30


@pytest.mark.slow
def test_prompts_help_scale_task():
    gains = []
    for seed in range(3):
        table = ablation.run_ablation("modules", RunConfig(), seed, task="scale_only")
        gains.append(
            _cell(table, pta=1, spg=1)["top1"] - _cell(table, pta=1, spg=0)["top1"]
        )

    assert np.mean(gains) >= 0.05


@pytest.mark.slow
@pytest.mark.parametrize("suite", ["ratio", "variants"])
def test_suite_cells_learn_motion(suite):
    table = ablation.run_ablation(suite, RunConfig(), seed=0)
    # chance is 0.25
    assert all(row["top1"] > 0.55 for row in table.rows), table.rows
