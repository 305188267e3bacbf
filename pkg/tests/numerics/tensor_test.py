# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# pylint: disable=protected-access,unspecified-encoding,consider-using-with
# mypy: allow-untyped-defs, allow-untyped-calls
# ruff: noqa: SLF001,PLR2004

""" """

import threading

import numpy as np
import pytest

from omniclip.numerics import (
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    backward,
    no_grad,
    ops,
)
from omniclip.numerics.tensor import grad_enabled


def test_leaf_tensor():
    t = Tensor([1.0, 2.0], trainable=True, name="w")
    assert t.shape == (2,)
    assert t.is_leaf
    assert t.requires_grad
    assert t.dtype == np.float64
    assert t.grad is None


def test_frozen_inputs_record_no_node():
    a = Tensor([1.0, 2.0])
    b = Tensor([3.0, 4.0])
    out = a + b
    assert out.node is None
    assert not out.requires_grad


def test_trainable_input_records_node():
    a = Tensor([1.0, 2.0], trainable=True)
    out = a * 3.0
    assert out.node is not None
    assert out.node.op == "scale"
    assert out.node.inputs == (a,)


def test_no_grad_disables_recording():
    a = Tensor([1.0, 2.0], trainable=True)
    with no_grad():
        assert not grad_enabled()
        out = a * 3.0

    assert grad_enabled()
    assert out.node is None


def test_no_grad_is_per_thread():
    seen = []

    def worker():
        seen.append(grad_enabled())

    with no_grad():
        thread = threading.Thread(target=worker)
        thread.start()
        thread.join()

    assert seen == [True]


def test_backward_shared_input():
    # d/dx (x*x + x) = 2x + 1
    x = Tensor([1.0, -2.0, 0.5], trainable=True)
    loss = ops.sum_(ops.add(ops.mul(x, x), x))
    backward(loss, [x])
    assert np.array_equal(x.grad, [3.0, -3.0, 2.0])


def test_backward_accumulates_over_calls():
    x = Tensor([1.0, 2.0], trainable=True)
    backward(ops.sum_(x), [x])
    backward(ops.sum_(x), [x])
    assert np.array_equal(x.grad, [2.0, 2.0])

    x.zero_grad()
    assert np.array_equal(x.grad, [0.0, 0.0])


def test_backward_frozen_leaf_gets_no_grad():
    x = Tensor([1.0, 2.0], trainable=True)
    c = Tensor([5.0, 7.0])
    backward(ops.sum_(ops.mul(x, c)), [x])
    assert np.array_equal(x.grad, [5.0, 7.0])
    assert c.grad is None


def test_backward_unreached_param_gets_zero():
    x = Tensor([1.0, 2.0], trainable=True)
    y = Tensor([3.0], trainable=True)
    backward(ops.sum_(x), [x, y])
    assert np.array_equal(y.grad, [0.0])


def test_backward_requires_scalar():
    x = Tensor([1.0, 2.0], trainable=True)
    with pytest.raises(ShapeError):
        backward(x * 2.0)


def test_tape_order():
    x = Tensor([1.0, 2.0], trainable=True)
    w = Tensor([3.0, 4.0], trainable=True)
    loss = ops.sum_(ops.mul(x, w))
    tape = Tape.from_loss(loss)
    assert tape.ops() == ["mul", "sum"]
    # leaves come before the nodes that use them
    assert tape.entries[-1] is loss
    assert {id(t) for t in tape.entries[:2]} == {id(x), id(w)}


def test_non_finite_is_rejected():
    x = Tensor([1e300], trainable=True)
    with pytest.raises(NonFiniteError) as err:
        ops.mul(x, x)

    assert err.value.op == "mul"


def test_item_requires_scalar():
    assert Tensor(2.5).item() == 2.5
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()


def test_detach():
    x = Tensor([1.0], trainable=True)
    y = (x * 2.0).detach()
    assert y.node is None
    assert not y.trainable
    assert np.array_equal(y.data, [2.0])


def test_float32_preserved():
    x = Tensor([1.0, 2.0], dtype=np.float32, trainable=True)
    out = ops.mul(x, Tensor([2.0, 2.0], dtype=np.float32))
    assert out.dtype == np.float32
