# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# pylint: disable=protected-access,unspecified-encoding,consider-using-with
# mypy: allow-untyped-defs, allow-untyped-calls
# ruff: noqa: SLF001,PLR2004

""" """

import numpy as np
import pytest

from omniclip.model import pta
from omniclip.numerics import ShapeError, SplitMix64, Tensor, grad_check, ops


def _adapter(dim=8, bottleneck=4, heads=2):
    adapter = pta.ParallelTemporalAdapter(SplitMix64(0), dim, bottleneck, heads)
    adapter.name_parameters("pta.")
    return adapter


def test_shape_and_trainable():
    adapter = _adapter()
    out = pta.pta_forward(adapter, Tensor(SplitMix64(1).normal((2, 3, 5, 8))))
    assert out.shape == (2, 3, 5, 8)
    assert adapter.bottleneck == 4
    assert all(t.trainable for t in adapter.parameters())


def test_bottleneck_range():
    with pytest.raises(ShapeError):
        pta.ParallelTemporalAdapter(SplitMix64(0), 8, 9, 1)


def test_positions_are_independent():
    # attention runs across frames at each token position only
    adapter = _adapter()
    x = SplitMix64(1).normal((1, 3, 5, 8))
    out = pta.pta_forward(adapter, Tensor(x)).data

    changed = x.copy()
    changed[0, :, 4] += 1.0
    out2 = pta.pta_forward(adapter, Tensor(changed)).data
    assert np.array_equal(out[0, :, :4], out2[0, :, :4])
    assert not np.allclose(out[0, :, 4], out2[0, :, 4])


def test_frames_interact():
    adapter = _adapter()
    x = SplitMix64(1).normal((1, 3, 5, 8))
    changed = x.copy()
    changed[0, 0] += 1.0
    out = pta.pta_forward(adapter, Tensor(x)).data
    out2 = pta.pta_forward(adapter, Tensor(changed)).data
    assert not np.allclose(out[0, 2], out2[0, 2])


def test_exclude_class_token():
    adapter = _adapter()
    x = Tensor(SplitMix64(1).normal((2, 3, 5, 8)))
    out = pta.pta_forward(adapter, x, exclude_cls=True).data
    assert not out[..., 0, :].any()
    full = pta.pta_forward(adapter, x).data
    assert np.allclose(out[..., 1:, :], full[..., 1:, :], atol=1e-12)


def test_gate():
    gate = pta.FusionGate()
    assert gate.alpha.shape == ()
    assert gate.value == 0.0
    assert gate.alpha.trainable


def test_fuse_zero_gate_is_exact():
    spatial = Tensor(SplitMix64(1).normal((2, 3, 4)))
    temporal = Tensor(SplitMix64(2).normal((2, 3, 4)))
    out = pta.fuse(spatial, temporal, pta.FusionGate(0.0))
    assert np.array_equal(out.data, spatial.data)


def test_fuse_value():
    spatial = Tensor(np.ones((2, 2)))
    temporal = Tensor(np.full((2, 2), 4.0))
    out = pta.fuse(spatial, temporal, pta.FusionGate(0.5))
    assert np.array_equal(out.data, np.full((2, 2), 3.0))


def test_fuse_shape_mismatch():
    with pytest.raises(ShapeError):
        pta.fuse(Tensor(np.ones((2, 2))), Tensor(np.ones((2, 3))), pta.FusionGate())


def test_gradients():
    adapter = _adapter()
    gate = pta.FusionGate(0.3)
    x = Tensor(SplitMix64(1).normal((2, 3, 5, 8)), trainable=True, name="x")
    weights = Tensor(SplitMix64(5).normal((2, 3, 5, 8)))

    def loss():
        fused = pta.fuse(x, pta.pta_forward(adapter, x), gate)
        return ops.sum_(ops.mul(fused, weights))

    params = [x, gate.alpha, *adapter.parameters()]
    assert grad_check(loss, params, atol=1e-8) < 1e-6
