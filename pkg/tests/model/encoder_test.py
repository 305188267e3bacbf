# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# pylint: disable=protected-access,unspecified-encoding,consider-using-with
# mypy: allow-untyped-defs, allow-untyped-calls
# ruff: noqa: SLF001,PLR2004

""" """

import numpy as np
import pytest

from omniclip import consts
from omniclip.model import OmniClip, encoder
from omniclip.numerics import ShapeError, SplitMix64, no_grad


def _video(cfg, batch=2, seed=7):
    return SplitMix64(seed).uniform(
        (batch, cfg.frames, cfg.channels, cfg.image_size, cfg.image_size)
    )


def _encode(model, video):
    with no_grad():
        return encoder.encode_video(model.encoder, video).data


def _set_alpha(model, value):
    for block in model.encoder.blocks:
        if block.gate is not None:
            block.gate.alpha.data[...] = value


def test_output_shape(micro_model, micro_config):
    out = _encode(micro_model, _video(micro_config))
    assert out.shape == (2, micro_config.out_dim)


def test_single_clip_gets_batch_axis(micro_model, micro_config):
    video = _video(micro_config, batch=1)
    assert np.array_equal(_encode(micro_model, video[0]), _encode(micro_model, video))


def test_rejects_wrong_video_shape(micro_model, micro_config):
    video = _video(micro_config)[:, :3]
    with pytest.raises(ShapeError):
        _encode(micro_model, video)


def test_blocks_layout(micro_model, micro_config):
    enc = micro_model.encoder
    assert enc.depth == micro_config.depth
    assert all(block.adapted for block in enc.blocks)
    assert all(block.vit.frozen for block in enc.blocks)
    assert enc.spg is not None


def test_pta_layer_mask(micro_config):
    model = OmniClip(micro_config.replace(pta_layers=0b10))
    assert [b.adapted for b in model.encoder.blocks] == [False, True]


def test_identity_at_init(micro_config):
    video = _video(micro_config, batch=100)
    adapted = _encode(OmniClip(micro_config), video)
    plain = _encode(OmniClip(micro_config.replace(pta_enabled=False)), video)
    assert np.array_equal(adapted, plain)


def test_variants_agree_at_zero_gate(micro_config):
    video = _video(micro_config)
    outs = [
        _encode(OmniClip(micro_config.replace(variant=variant)), video)
        for variant in consts.VARIANTS
    ]
    for out in outs[1:]:
        assert np.array_equal(out, outs[0])


def test_variants_differ_with_open_gate(micro_config):
    video = _video(micro_config)
    outs = []
    for variant in consts.VARIANTS:
        model = OmniClip(micro_config.replace(variant=variant))
        _set_alpha(model, 0.5)
        outs.append(_encode(model, video))

    assert not np.allclose(outs[0], outs[1])
    assert not np.allclose(outs[0], outs[2])
    assert not np.allclose(outs[1], outs[2])


def test_open_gate_changes_output(micro_config):
    video = _video(micro_config)
    model = OmniClip(micro_config)
    base = _encode(model, video)
    _set_alpha(model, 0.5)
    assert not np.allclose(_encode(model, video), base)


@pytest.mark.parametrize("variant", consts.VARIANTS)
def test_frame_permutation_invariance(micro_config, variant):
    model = OmniClip(micro_config.replace(variant=variant))
    _set_alpha(model, 0.7)
    model.encoder.encodings.te.data[...] = 0.0

    video = _video(micro_config)
    perm = np.array([2, 0, 3, 1])
    out = _encode(model, video)
    out_perm = _encode(model, video[:, perm])
    assert np.allclose(out, out_perm, atol=1e-12, rtol=0)


def test_temporal_encoding_breaks_permutation_invariance(micro_config):
    model = OmniClip(micro_config)
    _set_alpha(model, 0.7)
    video = _video(micro_config)
    out = _encode(model, video)
    out_perm = _encode(model, video[:, [2, 0, 3, 1]])
    assert not np.allclose(out, out_perm, atol=1e-12, rtol=0)


def test_exclude_class_token_config(micro_config):
    video = _video(micro_config)
    model = OmniClip(micro_config.replace(pta_exclude_cls=True))
    _set_alpha(model, 0.5)
    out = _encode(model, video)
    assert out.shape == (2, micro_config.out_dim)
    assert np.all(np.isfinite(out))


def test_prompts_per_layer(micro_config):
    video = _video(micro_config)
    once = OmniClip(micro_config)
    per_layer = OmniClip(micro_config.replace(spg_per_layer=True))
    # the first block sees the same prompts either way
    trace_once, trace_each = encoder.EncoderTrace(), encoder.EncoderTrace()
    with no_grad():
        encoder.encode_tokens(once.encoder, video, trace_once)
        encoder.encode_tokens(per_layer.encoder, video, trace_each)

    assert np.array_equal(
        trace_once.attention[0].data, trace_each.attention[0].data
    )
    assert not np.allclose(
        trace_once.attention[1].data, trace_each.attention[1].data
    )


def test_token_count_without_prompts(micro_config):
    cfg = micro_config.replace(spg_enabled=False)
    model = OmniClip(cfg)
    trace = encoder.EncoderTrace()
    with no_grad():
        tokens = encoder.encode_tokens(model.encoder, _video(cfg), trace)

    assert tokens.shape == (2, cfg.frames, 1 + cfg.num_patches, cfg.width)
    assert model.encoder.spg is None


def test_trace_shapes(micro_model, micro_config):
    trace = encoder.EncoderTrace()
    with no_grad():
        encoder.encode_video(micro_model.encoder, _video(micro_config), trace)

    num = micro_config.num_tokens
    assert sorted(trace.attention) == [0, 1]
    assert trace.attention[0].shape == (2, micro_config.frames, 2, num, num)


def test_heatmap(micro_model, micro_config):
    amap = encoder.attention_heatmap(micro_model.encoder, _video(micro_config))
    side = micro_config.grid_side
    assert amap.layer == micro_config.depth - 1
    assert amap.grid.shape == (2, micro_config.frames, side, side)
    assert amap.rows.shape == (2, micro_config.frames, micro_config.num_tokens)
    assert np.allclose(amap.rows.sum(axis=-1), 1.0, atol=1e-12)
    assert np.allclose(amap.mass, amap.grid.sum(axis=(-2, -1)), atol=1e-15)
    assert np.all(amap.mass > 0.0)
    assert np.all(amap.mass < 1.0)


def test_heatmap_uniform_attention(micro_model, micro_config):
    attn = micro_model.encoder.blocks[0].vit.attn
    for lin in (attn.wq, attn.wk):
        lin.weight.data[...] = 0.0
        lin.bias.data[...] = 0.0

    amap = encoder.attention_heatmap(micro_model.encoder, _video(micro_config), 0)
    num = micro_config.num_tokens
    assert np.allclose(amap.grid, 1.0 / num, atol=1e-15)
    assert np.allclose(amap.mass, micro_config.num_patches / num, atol=1e-15)


def test_heatmap_layer_index(micro_model, micro_config):
    video = _video(micro_config)
    last = encoder.attention_heatmap(micro_model.encoder, video, -1)
    same = encoder.attention_heatmap(micro_model.encoder, video, 1)
    assert np.array_equal(last.grid, same.grid)

    with pytest.raises(encoder.LayerIndexError):
        encoder.attention_heatmap(micro_model.encoder, video, 2)

    with pytest.raises(encoder.LayerIndexError):
        encoder.attention_heatmap(micro_model.encoder, video, -3)
