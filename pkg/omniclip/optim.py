# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""AdamW with decoupled weight decay and the warmup + cosine schedule."""

from __future__ import annotations

import logging
import math
import typing as ty
from dataclasses import dataclass, field

import numpy as np

if ty.TYPE_CHECKING:
    from .config import TrainConfig
    from .numerics import Tensor

_LOG = logging.getLogger(__name__)


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def decays(tensor: Tensor) -> bool:
    """Weight decay applies to matrices only; biases, norms, gates and
    token embeddings of shape [d] are left alone."""
    return tensor.ndim >= 2  # noqa: PLR2004


class AdamW:
    def __init__(
        self,
        params: dict[str, Tensor],
        *,
        betas: tuple[float, float] = (0.9, 0.98),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        state: AdamState | None = None,
    ) -> None:
        if frozen := [name for name, t in params.items() if not t.trainable]:
            raise ValueError(f"frozen parameters given to optimizer: {frozen[:3]}")

        self.params = params
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = state or AdamState()
        for name, tensor in params.items():
            self.state.m.setdefault(name, np.zeros_like(tensor.data))
            self.state.v.setdefault(name, np.zeros_like(tensor.data))

    def step(self, lr: float) -> None:
        beta1, beta2 = self.betas
        state = self.state
        state.step += 1
        corr1 = 1.0 - beta1**state.step
        corr2 = 1.0 - beta2**state.step

        for name, tensor in self.params.items():
            grad = tensor.grad
            if grad is None:
                grad = np.zeros_like(tensor.data)

            m = state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * grad
            v = state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * grad * grad

            data = tensor.data
            if self.weight_decay and decays(tensor):
                data = data * (1.0 - lr * self.weight_decay)

            update = (m / corr1) / (np.sqrt(v / corr2) + self.eps)
            tensor.data = (data - lr * update).astype(tensor.data.dtype, copy=False)

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()


def lr_at(step: int, cfg: TrainConfig, steps_per_epoch: int = 1) -> float:
    """Learning rate at optimizer step `step` (0-based).

    Linear warmup over `warmup_epochs` reaching the peak at the first
    post-warmup step, then cosine decay to `min_lr` at the last step.
    Warmup starts at `peak_lr / (warmup + 1)`, not 0, so step 0 updates.
    """
    total = cfg.epochs * steps_per_epoch
    warm = cfg.warmup_epochs * steps_per_epoch
    last = total - 1

    if step < warm:
        return cfg.peak_lr * (step + 1) / (warm + 1)

    if step == warm or last <= warm:
        return cfg.peak_lr

    if step >= last:
        return cfg.min_lr

    progress = (step - warm) / (last - warm)
    return cfg.min_lr + (cfg.peak_lr - cfg.min_lr) * 0.5 * (
        1.0 + math.cos(math.pi * progress)
    )
