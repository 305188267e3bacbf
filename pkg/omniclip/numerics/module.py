# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Parameter containers.

A `Module` exposes the Tensors held in its attributes (directly, in nested
modules or in lists of modules) under dotted names, in attribute definition
order.
"""

from __future__ import annotations

import math
import typing as ty

import numpy as np

from .rng import SplitMix64
from .tensor import Tensor


class Module:
    def named_parameters(self, prefix: str = "") -> ty.Iterator[tuple[str, Tensor]]:
        for key, val in vars(self).items():
            if key.startswith("_"):
                continue

            name = f"{prefix}{key}"
            if isinstance(val, Tensor):
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{name}.")
            elif isinstance(val, list | tuple):
                for idx, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{idx}.")
                    elif isinstance(item, Tensor):
                        yield f"{name}.{idx}", item

    def name_parameters(self, prefix: str = "") -> None:
        """Set every tensor name to its dotted path."""
        for name, tensor in self.named_parameters(prefix):
            tensor.name = name

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def set_trainable(self, trainable: bool) -> None:  # noqa: FBT001
        for _, tensor in self.named_parameters():
            tensor.trainable = trainable

    def zero_grad(self) -> None:
        for _, tensor in self.named_parameters():
            tensor.zero_grad()

    def num_parameters(self) -> int:
        return sum(t.size for t in self.parameters())


def param(
    data: np.ndarray,
    name: str,
    *,
    trainable: bool,
    dtype: np.dtype[ty.Any] | type[np.floating[ty.Any]] = np.float64,
) -> Tensor:
    return Tensor(data, trainable=trainable, name=name, dtype=dtype)


def init_weight(
    rng: SplitMix64, fan_in: int, fan_out: int, std: float | None = None
) -> np.ndarray:
    """Normal init scaled by 1/sqrt(fan_in) unless `std` given."""
    return rng.normal(
        (fan_in, fan_out), std=std if std is not None else 1 / math.sqrt(fan_in)
    )


class Linear(Module):
    def __init__(
        self,
        rng: SplitMix64,
        fan_in: int,
        fan_out: int,
        *,
        trainable: bool,
        bias: bool = True,
        zero: bool = False,
    ) -> None:
        wdata = (
            np.zeros((fan_in, fan_out))
            if zero
            else init_weight(rng, fan_in, fan_out)
        )
        self.weight = param(wdata, "weight", trainable=trainable)
        self.bias = (
            param(np.zeros(fan_out), "bias", trainable=trainable)
            if bias
            else None
        )

    @property
    def fan_in(self) -> int:
        return self.weight.shape[0]

    @property
    def fan_out(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        from . import ops  # noqa: PLC0415

        return ops.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, *, trainable: bool, eps: float = 1e-5) -> None:
        self.gamma = param(np.ones(dim), "gamma", trainable=trainable)
        self.beta = param(np.zeros(dim), "beta", trainable=trainable)
        self._eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        from . import ops  # noqa: PLC0415

        return ops.layer_norm(x, self.gamma, self.beta, self._eps)


def cast_parameters(module: Module, dtype: np.dtype[ty.Any]) -> None:
    for _, tensor in module.named_parameters():
        if tensor.data.dtype != dtype:
            tensor.data = tensor.data.astype(dtype)
