# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.
# ruff: noqa: PLR2004

"""Primitive operators.

Each primitive computes its forward value with numpy and, through
`make_result`, registers a backward closure returning one gradient (or None)
per input.
"""

from __future__ import annotations

import math
import typing as ty

import numpy as np

from ._support import ShapeError, normalize_axis, shape_str, unbroadcast
from .tensor import Tensor, make_result

_GELU_C: ty.Final = math.sqrt(2.0 / math.pi)


def as_tensor(value: Tensor | float, dtype: np.dtype[ty.Any]) -> Tensor:
    if isinstance(value, Tensor):
        return value

    return Tensor(value, dtype=dtype)


def _broadcast_shape(op: str, *shapes: tuple[int, ...]) -> tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(*shapes))
    except ValueError as exc:
        raise ShapeError(
            op, " vs ".join(shape_str(s) for s in shapes)
        ) from exc


# elementwise


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("add", a.shape, b.shape)
    sa, sb = a.shape, b.shape

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g, sa), unbroadcast(g, sb)

    return make_result("add", a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("sub", a.shape, b.shape)
    sa, sb = a.shape, b.shape

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g, sa), unbroadcast(-g, sb)

    return make_result("sub", a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("mul", a.shape, b.shape)
    ad, bd = a.data, b.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g * bd, ad.shape), unbroadcast(g * ad, bd.shape)

    return make_result("mul", ad * bd, (a, b), backward)


def scale(x: Tensor, factor: float) -> Tensor:
    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * factor,)

    return make_result("scale", x.data * factor, (x,), backward)


def gelu(x: Tensor) -> Tensor:
    """Tanh approximation of gelu."""
    xd = x.data
    inner = _GELU_C * (xd + 0.044715 * xd**3)
    th = np.tanh(inner)
    out = 0.5 * xd * (1.0 + th)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * xd**2)
        deriv = 0.5 * (1.0 + th) + 0.5 * xd * (1.0 - th**2) * dinner
        return (g * deriv,)

    return make_result("gelu", out, (x,), backward)


# contractions


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product a[.., m, k] @ b[.., k, n]."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul", "operands must have at least 2 dims")

    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            "matmul", f"{shape_str(a.shape)} @ {shape_str(b.shape)}"
        )

    _broadcast_shape("matmul", a.shape[:-2], b.shape[:-2])
    ad, bd = a.data, b.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return unbroadcast(ga, ad.shape), unbroadcast(gb, bd.shape)

    return make_result("matmul", ad @ bd, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map x[.., in] @ weight[in, out] + bias[out]."""
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError(
            "linear", f"{shape_str(x.shape)} @ {shape_str(weight.shape)}"
        )

    if bias is not None and bias.shape != (weight.shape[1],):
        raise ShapeError("linear", f"bias {shape_str(bias.shape)}")

    xd, wd = x.data, weight.data
    out = xd @ wd
    if bias is not None:
        out = out + bias.data

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        g2 = g.reshape(-1, g.shape[-1])
        x2 = xd.reshape(-1, xd.shape[-1])
        gx = g @ wd.T
        gw = x2.T @ g2
        if bias is None:
            return gx, gw

        return gx, gw, g2.sum(axis=0)

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result("linear", out, inputs, backward)


# normalisation


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    ax = normalize_axis(axis, x.ndim)
    shifted = x.data - x.data.max(axis=ax, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=ax, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        dot = (g * out).sum(axis=ax, keepdims=True)
        return (out * (g - dot),)

    return make_result("softmax", out, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    ax = normalize_axis(axis, x.ndim)
    shifted = x.data - x.data.max(axis=ax, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=ax, keepdims=True))
    out = shifted - lse

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        probs = np.exp(out)
        return (g - probs * g.sum(axis=ax, keepdims=True),)

    return make_result("log_softmax", out, (x,), backward)


def layer_norm(
    x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5
) -> Tensor:
    dim = x.shape[-1]
    if dim < 2:
        raise ShapeError("layer_norm", "normalised dim must be >= 2")

    if gamma.shape != (dim,) or beta.shape != (dim,):
        raise ShapeError("layer_norm", f"affine params for dim {dim}")

    xd = x.data
    mean = xd.mean(axis=-1, keepdims=True)
    cen = xd - mean
    var = (cen * cen).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = cen * inv
    gd = gamma.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, ...]:
        gxhat = g * gd
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        g2 = g.reshape(-1, dim)
        ggamma = (g2 * xhat.reshape(-1, dim)).sum(axis=0)
        gbeta = g2.sum(axis=0)
        return gx, ggamma, gbeta

    return make_result(
        "layer_norm", xhat * gd + beta.data, (x, gamma, beta), backward
    )


def l2_normalize(x: Tensor, axis: int = -1) -> Tensor:
    ax = normalize_axis(axis, x.ndim)
    norm = np.sqrt((x.data * x.data).sum(axis=ax, keepdims=True))
    if (norm == 0.0).any():
        raise ShapeError("l2_normalize", "zero-norm slice")

    out = x.data / norm

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        dot = (g * out).sum(axis=ax, keepdims=True)
        return ((g - out * dot) / norm,)

    return make_result("l2_normalize", out, (x,), backward)


# reductions


def sum_(x: Tensor, axis: int | None = None, *, keepdims: bool = False) -> Tensor:
    shape = x.shape
    if axis is None:
        out = np.array(x.data.sum())

        def backward_all(g: np.ndarray) -> tuple[np.ndarray]:
            return (np.broadcast_to(g, shape).copy(),)

        return make_result("sum", out, (x,), backward_all)

    ax = normalize_axis(axis, x.ndim)
    out = x.data.sum(axis=ax, keepdims=keepdims)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        gk = g if keepdims else np.expand_dims(g, ax)
        return (np.broadcast_to(gk, shape).copy(),)

    return make_result("sum", out, (x,), backward)


def mean(x: Tensor, axis: int | None = None, *, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else x.shape[normalize_axis(axis, x.ndim)]
    return scale(sum_(x, axis, keepdims=keepdims), 1.0 / count)


# layout


def reshape(x: Tensor, shape: ty.Sequence[int]) -> Tensor:
    src = x.shape
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as exc:
        raise ShapeError(
            "reshape", f"{shape_str(src)} -> {shape_str(shape)}"
        ) from exc

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(src),)

    return make_result("reshape", out, (x,), backward)


def transpose(x: Tensor, axes: ty.Sequence[int]) -> Tensor:
    perm = tuple(normalize_axis(a, x.ndim) for a in axes)
    if sorted(perm) != list(range(x.ndim)):
        raise ShapeError("transpose", f"invalid permutation {perm}")

    inverse = tuple(int(i) for i in np.argsort(perm))
    out = np.ascontiguousarray(np.transpose(x.data, perm))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.ascontiguousarray(np.transpose(g, inverse)),)

    return make_result("transpose", out, (x,), backward)


def swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def expand(x: Tensor, shape: ty.Sequence[int]) -> Tensor:
    src = x.shape
    target = tuple(shape)
    if _broadcast_shape("expand", src, target) != target:
        raise ShapeError("expand", f"{shape_str(src)} -> {shape_str(target)}")

    out = np.broadcast_to(x.data, target).copy()

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (unbroadcast(g, src),)

    return make_result("expand", out, (x,), backward)


def concat(tensors: ty.Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ShapeError("concat", "no inputs")

    ax = normalize_axis(axis, tensors[0].ndim)
    ref = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if len(other) != len(ref) or any(
            r != o for i, (r, o) in enumerate(zip(ref, other)) if i != ax
        ):
            raise ShapeError(
                "concat", f"{shape_str(ref)} vs {shape_str(other)}"
            )

    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum([0, *sizes])
    out = np.concatenate([t.data for t in tensors], axis=ax)

    def backward(g: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(
            np.ascontiguousarray(
                np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax)
            )
            for i in range(len(sizes))
        )

    return make_result("concat", out, tuple(tensors), backward)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice `length` entries along `axis` starting at `start`."""
    ax = normalize_axis(axis, x.ndim)
    if start < 0 or length < 1 or start + length > x.shape[ax]:
        raise ShapeError(
            "narrow", f"[{start}:{start + length}] of extent {x.shape[ax]}"
        )

    index: list[slice] = [slice(None)] * x.ndim
    index[ax] = slice(start, start + length)
    sel = tuple(index)
    src = x.shape
    out = np.ascontiguousarray(x.data[sel])

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros(src, dtype=g.dtype)
        full[sel] = g
        return (full,)

    return make_result("narrow", out, (x,), backward)


def select(x: Tensor, axis: int, index: int) -> Tensor:
    """Pick one entry along `axis`, dropping the axis."""
    ax = normalize_axis(axis, x.ndim)
    part = narrow(x, ax, index, 1)
    shape = list(x.shape)
    del shape[ax]
    return reshape(part, shape)


# pooling


def _check_grid(op: str, x: Tensor) -> tuple[int, int]:
    if x.ndim < 3:
        raise ShapeError(op, "expected [.., s, s, d]")

    rows, cols = x.shape[-3], x.shape[-2]
    if rows % 2 or cols % 2:
        raise ShapeError(op, f"odd grid side {rows}x{cols}")

    return rows, cols


def _blocks(data: np.ndarray, rows: int, cols: int) -> np.ndarray:
    # [.., r/2, 2, c/2, 2, d] -> [.., r/2, c/2, 4, d]
    lead = data.shape[:-3]
    dim = data.shape[-1]
    blk = data.reshape((*lead, rows // 2, 2, cols // 2, 2, dim))
    nd = blk.ndim
    perm = (*range(nd - 5), nd - 5, nd - 3, nd - 4, nd - 2, nd - 1)
    return np.transpose(blk, perm).reshape(
        (*lead, rows // 2, cols // 2, 4, dim)
    )


def _unblocks(data: np.ndarray, rows: int, cols: int) -> np.ndarray:
    lead = data.shape[:-4]
    dim = data.shape[-1]
    blk = data.reshape((*lead, rows // 2, cols // 2, 2, 2, dim))
    nd = blk.ndim
    perm = (*range(nd - 5), nd - 5, nd - 3, nd - 4, nd - 2, nd - 1)
    return np.ascontiguousarray(
        np.transpose(blk, perm).reshape((*lead, rows, cols, dim))
    )


def avg_pool_2x2(x: Tensor) -> Tensor:
    rows, cols = _check_grid("avg_pool_2x2", x)
    blocks = _blocks(x.data, rows, cols)
    out = blocks.mean(axis=-2)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        spread = np.repeat(np.expand_dims(g * 0.25, -2), 4, axis=-2)
        return (_unblocks(spread, rows, cols),)

    return make_result("avg_pool_2x2", out, (x,), backward)


def max_pool_2x2(x: Tensor) -> Tensor:
    """Channelwise max; ties route gradient to the first block entry."""
    rows, cols = _check_grid("max_pool_2x2", x)
    blocks = _blocks(x.data, rows, cols)
    arg = blocks.argmax(axis=-2)
    out = np.take_along_axis(blocks, np.expand_dims(arg, -2), axis=-2)
    out = out.squeeze(-2)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        spread = np.zeros(blocks.shape, dtype=g.dtype)
        np.put_along_axis(
            spread, np.expand_dims(arg, -2), np.expand_dims(g, -2), axis=-2
        )
        return (_unblocks(spread, rows, cols),)

    return make_result("max_pool_2x2", out, (x,), backward)
