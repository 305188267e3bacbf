# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Dense tensor with reverse-mode automatic differentiation.

Every primitive returns a new Tensor. When any input requires gradient the
output carries a `Node` (the primitive name, its inputs and a backward
closure). `Tape.from_loss` orders the nodes reachable from a loss
topologically; `backward` replays that tape in reverse.
"""

from __future__ import annotations

import contextlib
import contextvars
import logging
import typing as ty
from dataclasses import dataclass

import numpy as np

from . import _support
from ._support import Shape, check_finite

_LOG = logging.getLogger(__name__)

_GRAD_ENABLED: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "grad_enabled", default=True
)

DEFAULT_DTYPE: ty.Final = np.float64

BackwardFn = ty.Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


@contextlib.contextmanager
def no_grad() -> ty.Iterator[None]:
    """Disable graph recording in the current context (thread safe)."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


@dataclass(slots=True)
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    backward: BackwardFn


class Tensor:
    __slots__ = ("_node", "data", "grad", "name", "trainable")

    def __init__(
        self,
        data: object,
        *,
        trainable: bool = False,
        name: str = "",
        dtype: type[np.floating[ty.Any]] | np.dtype[ty.Any] | None = None,
    ) -> None:
        arr = np.array(data, dtype=dtype or DEFAULT_DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(())

        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.trainable = trainable
        self.name = name
        self._node: Node | None = None

    def __repr__(self) -> str:
        flags = "trainable" if self.trainable else "frozen"
        return (
            f"Tensor({self.name or '?'}, shape={_support.shape_str(self.shape)}"
            f", {flags}, op={self._node.op if self._node else 'leaf'})"
        )

    @property
    def shape(self) -> Shape:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype[ty.Any]:
        return self.data.dtype

    @property
    def node(self) -> Node | None:
        return self._node

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    @property
    def requires_grad(self) -> bool:
        return self.trainable or self._node is not None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise _support.ShapeError("item", "tensor is not scalar")

        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data) if self.trainable else None

    def detach(self) -> Tensor:
        return Tensor(self.data, name=self.name, dtype=self.data.dtype)

    def accumulate(self, grad: np.ndarray) -> None:
        if not self.trainable:
            return

        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad = self.grad + grad

    # operators; implementations live in ops
    def __add__(self, other: Tensor | float) -> Tensor:
        from . import ops  # noqa: PLC0415

        return ops.add(self, ops.as_tensor(other, self.dtype))

    def __radd__(self, other: float) -> Tensor:
        return self.__add__(other)

    def __sub__(self, other: Tensor | float) -> Tensor:
        from . import ops  # noqa: PLC0415

        return ops.sub(self, ops.as_tensor(other, self.dtype))

    def __mul__(self, other: Tensor | float) -> Tensor:
        from . import ops  # noqa: PLC0415

        if isinstance(other, Tensor):
            return ops.mul(self, other)

        return ops.scale(self, float(other))

    def __rmul__(self, other: float) -> Tensor:
        return self.__mul__(other)

    def __neg__(self) -> Tensor:
        from . import ops  # noqa: PLC0415

        return ops.scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from . import ops  # noqa: PLC0415

        return ops.matmul(self, other)


def make_result(
    op: str,
    data: np.ndarray,
    inputs: tuple[Tensor, ...],
    backward: BackwardFn,
) -> Tensor:
    """Wrap primitive output; record node when gradient is needed."""
    check_finite(op, data)
    if _support.DEBUG:
        _LOG.debug("%s -> %s", op, _support.shape_str(data.shape))

    out = Tensor(data, dtype=data.dtype)
    if grad_enabled() and any(t.requires_grad for t in inputs):
        out._node = Node(op, inputs, backward)  # noqa: SLF001

    return out


class Tape:
    """Ordered record of primitive applications reachable from a loss."""

    def __init__(self, entries: list[Tensor]) -> None:
        # topological order: inputs before outputs
        self.entries = entries

    def __len__(self) -> int:
        return len(self.entries)

    def ops(self) -> list[str]:
        return [t.node.op for t in self.entries if t.node]

    @classmethod
    def from_loss(cls: type[Tape], loss: Tensor) -> Tape:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(loss, False)]
        while stack:
            tensor, expanded = stack.pop()
            if expanded:
                order.append(tensor)
                continue

            if id(tensor) in visited:
                continue

            visited.add(id(tensor))
            stack.append((tensor, True))
            if node := tensor.node:
                stack.extend(
                    (inp, False)
                    for inp in node.inputs
                    if inp.requires_grad and id(inp) not in visited
                )

        return cls(order)

    def replay(self, loss: Tensor, seed_grad: np.ndarray) -> None:
        grads: dict[int, np.ndarray] = {id(loss): seed_grad}
        for tensor in reversed(self.entries):
            grad = grads.pop(id(tensor), None)
            if grad is None:
                continue

            node = tensor.node
            if node is None:
                tensor.accumulate(grad)
                continue

            for inp, igrad in zip(
                node.inputs, node.backward(grad), strict=True
            ):
                if igrad is None or not inp.requires_grad:
                    continue

                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + igrad
                else:
                    grads[key] = igrad


def backward(
    loss: Tensor,
    params: ty.Iterable[Tensor] | None = None,
) -> Tape:
    """Run reverse accumulation from scalar `loss`.

    Trainable leaves in `params` that the loss does not reach get a zero
    gradient. Returns the replayed tape.
    """
    if loss.size != 1:
        raise _support.ShapeError("backward", "loss must be scalar")

    check_finite("backward", loss.data)

    if params is not None:
        for par in params:
            if par.trainable and par.grad is None:
                par.grad = np.zeros_like(par.data)

    tape = Tape.from_loss(loss)
    _LOG.debug("backward over %d tape entries", len(tape))
    tape.replay(loss, np.ones_like(loss.data))
    return tape
