# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# pylint: disable=protected-access,unspecified-encoding,consider-using-with
# mypy: allow-untyped-defs, allow-untyped-calls
# ruff: noqa: SLF001,PLR2004

""" """

import numpy as np
import pytest

from omniclip.numerics import (
    GradCheckError,
    Tensor,
    grad_check,
    grad_check_report,
    ops,
)
from omniclip.numerics.tensor import make_result


def test_correct_gradient_passes():
    x = Tensor([0.5, -1.0, 2.0], trainable=True, name="x")
    report = grad_check_report(lambda: ops.sum_(ops.mul(x, x)), [x])
    assert report.checked == 3
    assert report.max_rel_err < 1e-8
    assert np.array_equal(x.data, [0.5, -1.0, 2.0])


def _broken_square(x):
    # backward is off by a factor of two
    def backward(g):
        return (g * x.data,)

    return make_result("broken", x.data * x.data, (x,), backward)


def test_wrong_gradient_is_reported():
    x = Tensor([1.0, 3.0], trainable=True, name="x")
    report = grad_check_report(lambda: ops.sum_(_broken_square(x)), [x])
    assert report.max_rel_err == pytest.approx(0.5, rel=1e-6)
    assert report.worst_param == "x"
    assert report.analytic == pytest.approx(0.5 * report.numeric, rel=1e-6)


def test_frozen_params_are_skipped():
    x = Tensor([1.0], trainable=True)
    c = Tensor([2.0])
    report = grad_check_report(lambda: ops.sum_(ops.mul(x, c)), [x, c])
    assert report.checked == 1


def test_atol_treats_small_differences_as_exact():
    x = Tensor([1.0, 3.0], trainable=True, name="x")
    assert grad_check(lambda: ops.sum_(_broken_square(x)), [x], atol=10.0) == 0.0


def test_non_finite_loss():
    x = Tensor([1.0], trainable=True)
    with pytest.raises(GradCheckError):
        grad_check(lambda: Tensor(float("nan")), [x])
