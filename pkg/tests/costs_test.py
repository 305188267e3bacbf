# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# pylint: disable=protected-access,unspecified-encoding,consider-using-with
# mypy: allow-untyped-defs, allow-untyped-calls
# ruff: noqa: SLF001,PLR2004

""" """

import pytest

from omniclip import costs
from omniclip.config import ModelConfig
from omniclip.model import OmniClip

MICRO = ModelConfig(
    image_size=16,
    patch_size=8,
    depth=2,
    width=16,
    heads=2,
    frames=4,
    out_dim=8,
    agg_heads=2,
    text_layers=1,
)
micro = MICRO.replace


def test_primitive_counts():
    assert costs.linear_flops(3, 4, 5) == 120
    assert costs.attention_flops(2, 4) == 320
    assert costs.linear_params(4, 5) == 25
    assert costs.linear_params(4, 5, bias=False) == 20
    assert costs.vit_block_params(16) == 3280
    assert costs.mlp_sublayer_params(16) == 2160
    # one 64-wide projection over 21 tokens
    assert costs.linear_flops(21, 64, 64) == 172_032


def test_vit_b_block():
    # 7.09M scalars per ViT-B/16 block
    assert costs.vit_block_params(768) == 7_087_872


def test_adapter_cost():
    pta = costs.adapter_cost(micro())
    assert pta.flops == 10_752
    assert pta.trainable == 229
    assert pta.frozen == 0

    assert costs.adapter_cost(micro(pta_exclude_cls=True)).flops == 8960


def test_block_flops():
    report = costs.cost_report(micro())
    # 4 frames of 6 tokens
    assert report.get("block0").flops == 4 * 39_168
    assert report.get("patch_embed").flops == 98_304


@pytest.mark.parametrize(
    "changes",
    [
        {},
        {"spg_projector": False},
        {"spg_enabled": False},
        {"pta_enabled": False},
        {"pta_layers": 0b10},
        {"pta_ratio": 0.5, "variant": "cascade"},
        {"trainable_te": True, "trainable_temperature": True},
    ],
)
def test_counts_match_model(changes):
    cfg = micro(**changes)
    model = OmniClip(cfg)
    state = model.state()
    report = costs.cost_report(cfg, len(model.text.vocabulary))
    assert report.params == model.num_parameters()
    assert report.trainable == state.num_trainable()
    assert report.frozen == state.num_frozen()


def test_entries_follow_block_order():
    names = [e.name for e in costs.cost_report(micro(pta_layers=0b10)).entries]
    assert names.index("block1") < names.index("pta1") < names.index("ln_post")
    assert "pta0" not in names


def test_prompts_add_flops():
    with_spg = costs.cost_report(micro())
    without = costs.cost_report(micro(spg_enabled=False))
    assert with_spg.get("block0").flops > without.get("block0").flops
    with pytest.raises(KeyError):
        without.get("spg")


@pytest.mark.parametrize("cfg", [ModelConfig(), ModelConfig.vit_b16()])
def test_trainable_share_small(cfg):
    report = costs.cost_report(cfg)
    assert 0.0 < report.trainable_share < 0.3


def test_vit_b16_backbone():
    report = costs.cost_report(ModelConfig.vit_b16())
    blocks = sum(report.get(f"block{idx}").frozen for idx in range(12))
    assert blocks == 12 * 7_087_872
    # 1 + 196 + 49 tokens per frame
    assert report.get("block0").flops == 8 * 3_668_226_048
    assert report.get("pta0").flops == 1_753_251_840


@pytest.mark.parametrize(
    ("variant", "touch"),
    [
        ("block_parallel", 3280 + 32),
        ("attention_parallel", 3280 + 2160 + 32),
        ("cascade", 2 * 3280 + 32),
    ],
)
def test_backward_param_touch(variant, touch):
    assert costs.backward_param_touch(micro(variant=variant)) == touch


def test_backward_touch_later_adapters():
    assert costs.backward_param_touch(micro(pta_layers=0b10)) == 32
    assert costs.backward_param_touch(micro(pta_enabled=False)) == 0


def test_to_dict():
    report = costs.cost_report(micro())
    doc = report.to_dict()
    assert doc["flops"] == sum(m["flops"] for m in doc["modules"])
    assert doc["trainable"] + doc["frozen"] == report.params
    assert doc["backward_param_touch"] == report.backward_param_touch


@pytest.mark.parametrize(
    ("cfg", "flops"),
    [
        (MICRO, 440_832),
        (ModelConfig(), 77_922_304),
        (ModelConfig.vit_b16(), 375_986_454_528),
    ],
)
def test_total_flops(cfg, flops):
    assert costs.cost_report(cfg).flops == flops


def test_flops_grow_with_ratio():
    flops = [
        costs.cost_report(ModelConfig(pta_ratio=ratio)).flops
        for ratio in (0.125, 0.25, 0.5, 1.0)
    ]
    assert flops == sorted(set(flops))
