# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Central finite-difference check of reverse-mode gradients."""

from __future__ import annotations

import logging
import math
import typing as ty
from dataclasses import dataclass

import numpy as np

from ._support import GradCheckError
from .tensor import Tensor, backward, no_grad

_LOG = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst_param: str
    worst_index: tuple[int, ...]
    analytic: float
    numeric: float
    checked: int


def _loss_value(fun: ty.Callable[[], Tensor]) -> float:
    with no_grad():
        val = fun().item()

    if not math.isfinite(val):
        raise GradCheckError("non-finite loss")

    return val


def grad_check_report(
    fun: ty.Callable[[], Tensor],
    params: ty.Sequence[Tensor],
    eps: float = 1e-6,
    *,
    atol: float = 0.0,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Compare analytic gradient of every scalar in trainable `params`
    with (f(θ+eps) - f(θ-eps)) / (2 eps).

    Relative error uses max(|analytic|, |numeric|, floor) as denominator;
    entries with |analytic - numeric| <= atol count as exact.
    """
    trainable = [p for p in params if p.trainable]
    for par in trainable:
        par.grad = None

    loss = fun()
    if not math.isfinite(loss.item()):
        raise GradCheckError("non-finite loss")

    backward(loss, trainable)
    analytic = [ty.cast(np.ndarray, p.grad).copy() for p in trainable]

    report = GradCheckReport(0.0, "", (), 0.0, 0.0, 0)
    for par, grad in zip(trainable, analytic, strict=True):
        for idx in np.ndindex(par.shape):
            orig = par.data[idx]
            par.data[idx] = orig + eps
            fplus = _loss_value(fun)
            par.data[idx] = orig - eps
            fminus = _loss_value(fun)
            par.data[idx] = orig

            num = (fplus - fminus) / (2 * eps)
            ana = float(grad[idx])
            diff = abs(ana - num)
            err = 0.0 if diff <= atol else diff / max(abs(ana), abs(num), floor)
            report.checked += 1
            if err > report.max_rel_err:
                report.max_rel_err = err
                report.worst_param = par.name
                report.worst_index = tuple(int(i) for i in idx)
                report.analytic = ana
                report.numeric = num

    _LOG.debug("grad check: %r", report)
    return report


def grad_check(
    fun: ty.Callable[[], Tensor],
    params: ty.Sequence[Tensor],
    eps: float = 1e-6,
    *,
    atol: float = 0.0,
) -> float:
    """Worst relative error between analytic and numeric gradients."""
    return grad_check_report(fun, params, eps, atol=atol).max_rel_err
