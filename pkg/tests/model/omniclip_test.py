# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# pylint: disable=protected-access,unspecified-encoding,consider-using-with
# mypy: allow-untyped-defs, allow-untyped-calls
# ruff: noqa: SLF001,PLR2004

""" """

import numpy as np
import pytest

from omniclip.model import OmniClip, encoder, objective
from omniclip.numerics import SplitMix64, backward, grad_check, grad_check_report

CLASSES = ["up", "down", "left", "right"]


def _video(cfg, batch=2, seed=7):
    return SplitMix64(seed).uniform(
        (batch, cfg.frames, cfg.channels, cfg.image_size, cfg.image_size)
    )


def _loss_fn(model, video, labels):
    def loss():
        return objective.classification_loss(
            model.similarities(video, CLASSES), labels, model.head
        )

    return loss


def _open_gates(model, value=0.5):
    for block in model.encoder.blocks:
        if block.gate is not None:
            block.gate.alpha.data[...] = value


def test_trainable_split(micro_model):
    state = micro_model.state()
    trainable = set(state.trainable)
    assert "encoder.blocks.0.gate.alpha" in trainable
    assert "encoder.blocks.1.adapter.down.weight" in trainable
    assert "encoder.spg.fc1.weight" in trainable
    assert "encoder.frame_proj.weight" in trainable
    assert "encoder.aggregator.wq.weight" in trainable
    assert "encoder.blocks.0.vit.attn.wq.weight" in state.frozen
    assert "encoder.embed.cls_token" in state.frozen
    assert "encoder.encodings.te" in state.frozen
    assert "head.logit_scale" in state.frozen
    assert all(name.startswith("encoder.") for name in trainable)
    assert not any(name.startswith("text.") for name in trainable)
    assert state.num_trainable() + state.num_frozen() == micro_model.num_parameters()


def test_parameter_names(micro_model):
    for name, tensor in micro_model.named_parameters():
        assert tensor.name == name


def test_trainable_temperature_and_te(micro_config):
    model = OmniClip(
        micro_config.replace(trainable_temperature=True, trainable_te=True)
    )
    trainable = model.trainable_parameters()
    assert "head.logit_scale" in trainable
    assert "encoder.encodings.te" in trainable


def test_same_seed_same_weights(micro_config):
    first = dict(OmniClip(micro_config).named_parameters())
    second = dict(OmniClip(micro_config).named_parameters())
    other = dict(OmniClip(micro_config.replace(seed=1)).named_parameters())
    for name, tensor in first.items():
        assert np.array_equal(tensor.data, second[name].data)

    assert not np.array_equal(
        first["encoder.blocks.0.vit.fc1.weight"].data,
        other["encoder.blocks.0.vit.fc1.weight"].data,
    )


def test_backbone_independent_of_adapter_flags(micro_config):
    full = dict(OmniClip(micro_config).named_parameters())
    bare = dict(
        OmniClip(
            micro_config.replace(pta_enabled=False, spg_enabled=False)
        ).named_parameters()
    )
    for name, tensor in bare.items():
        assert np.array_equal(tensor.data, full[name].data), name


def test_float32(micro_config):
    model = OmniClip(micro_config.replace(dtype="float32"))
    assert all(t.dtype == np.float32 for t in model.parameters())
    sims = model.predict(_video(micro_config), CLASSES)
    assert sims.dtype == np.float32


def test_class_features_cached(micro_model):
    first = micro_model.class_features(CLASSES)
    assert micro_model.class_features(CLASSES) is first
    micro_model.clear_text_cache()
    again = micro_model.class_features(CLASSES)
    assert again is not first
    assert np.array_equal(again.data, first.data)


def test_predict(micro_model, micro_config):
    sims = micro_model.predict(_video(micro_config), CLASSES)
    assert isinstance(sims, np.ndarray)
    assert sims.shape == (2, 4)
    assert np.all(np.abs(sims) <= 1.0 + 1e-12)


def test_gradient_reaches_gates_at_init(micro_model, micro_config):
    video = _video(micro_config)
    params = micro_model.trainable_parameters()
    backward(_loss_fn(micro_model, video, [0, 1])(), params.values())

    for name, tensor in params.items():
        assert tensor.grad is not None, name

    assert params["encoder.blocks.0.gate.alpha"].grad != 0.0
    assert params["encoder.frame_proj.weight"].grad.any()
    assert params["encoder.spg.fc2.weight"].grad.any()
    # a closed gate blocks the adapter weights
    assert not params["encoder.blocks.0.adapter.up.weight"].grad.any()


def test_gradient_reaches_every_trainable_tensor(micro_config):
    model = OmniClip(micro_config)
    _open_gates(model)
    params = model.trainable_parameters()
    backward(_loss_fn(model, _video(micro_config), [0, 3])(), params.values())
    for name, tensor in params.items():
        # softmax is invariant to the key bias; its gradient is zero
        if not name.endswith("wk.bias"):
            assert tensor.grad.any(), name

    for tensor in model.state().frozen.values():
        assert tensor.grad is None


def test_gradient_check_gates_and_projection(micro_config):
    model = OmniClip(micro_config)
    _open_gates(model, 0.3)
    params = model.trainable_parameters()
    subset = [
        params["encoder.blocks.0.gate.alpha"],
        params["encoder.blocks.1.gate.alpha"],
        params["encoder.blocks.1.adapter.up.bias"],
        params["encoder.frame_proj.bias"],
    ]
    loss = _loss_fn(model, _video(micro_config), [1, 2])
    assert grad_check(loss, subset, atol=1e-8) < 1e-5


@pytest.mark.slow
@pytest.mark.parametrize("variant", ["block_parallel", "attention_parallel", "cascade"])
def test_gradient_check_full_model(micro_config, variant):
    cfg = micro_config.replace(variant=variant, trainable_temperature=True)
    model = OmniClip(cfg, label_smoothing=0.1)
    _open_gates(model, 0.4)
    loss = _loss_fn(model, _video(cfg), [0, 2])
    report = grad_check_report(
        loss, list(model.trainable_parameters().values()), atol=1e-8
    )
    assert report.max_rel_err < 1e-4, report


def test_trace_through_similarities(micro_model, micro_config):
    trace = encoder.EncoderTrace()
    micro_model.similarities(_video(micro_config), CLASSES, trace)
    assert len(trace.attention) == micro_config.depth
