# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
"""
Support functions and errors for the tensor engine.
"""

from __future__ import annotations

import typing as ty

import numpy as np

DEBUG = False

Shape = tuple[int, ...]


def shape_str(shape: ty.Iterable[int]) -> str:
    return "[" + ",".join(str(s) for s in shape) + "]"


def normalize_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError("axis", f"{axis} out of range for ndim {ndim}")

    return axis % ndim


def unbroadcast(grad: np.ndarray, shape: Shape) -> np.ndarray:
    """Sum `grad` over the axes that were broadcast to reach its shape."""
    if grad.shape == shape:
        return grad

    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))

    axes = tuple(
        idx
        for idx, (gdim, sdim) in enumerate(zip(grad.shape, shape, strict=True))
        if sdim == 1 and gdim != 1
    )
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)

    return grad.reshape(shape)


def check_finite(op: str, data: np.ndarray) -> None:
    if not np.isfinite(data).all():
        raise NonFiniteError(op)


class ShapeError(ValueError):
    def __init__(self, op: str, detail: str) -> None:
        self.op = op
        self.detail = detail

    def __str__(self) -> str:
        return f"shape error in {self.op}: {self.detail}"


class NonFiniteError(ArithmeticError):
    def __init__(self, op: str) -> None:
        self.op = op

    def __str__(self) -> str:
        return f"non-finite value produced by {self.op}"


class GradCheckError(Exception):
    def __init__(self, reason: str) -> None:
        self.reason = reason

    def __str__(self) -> str:
        return f"gradient check failed: {self.reason}"
