# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

"""Seeded, platform independent pseudo-random generator.

SplitMix64 with an explicit 64-bit state. Blocks of values are produced
vectorised: value i of a block is mix(state + (i + 1) * GOLDEN), after which
the state advances by n * GOLDEN, so drawing n values at once or one by one
gives the same stream.
"""

from __future__ import annotations

import math
import typing as ty

import numpy as np

MASK64: ty.Final = (1 << 64) - 1
GOLDEN: ty.Final = 0x9E3779B97F4A7C15
_MUL1: ty.Final = np.uint64(0xBF58476D1CE4E5B9)
_MUL2: ty.Final = np.uint64(0x94D049BB133111EB)


def _mix_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2

    return ty.cast(np.ndarray, z ^ (z >> np.uint64(31)))


def mix64(value: int) -> int:
    z = value & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int | str) -> int:
    """Derive independent seed from `seed` and sequence of keys."""
    state = mix64(seed + GOLDEN)
    for key in keys:
        if isinstance(key, str):
            # fnv-1a; stable across runs unlike hash()
            kval = 0xCBF29CE484222325
            for byte in key.encode():
                kval = ((kval ^ byte) * 0x100000001B3) & MASK64
        else:
            kval = key & MASK64

        state = mix64(state ^ mix64(kval + GOLDEN))

    return state


class SplitMix64:
    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def __repr__(self) -> str:
        return f"SplitMix64(state=0x{self.state:016x})"

    def next_u64(self, count: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            idx = np.arange(1, count + 1, dtype=np.uint64)
            raw = np.uint64(self.state) + idx * np.uint64(GOLDEN)

        self.state = (self.state + count * GOLDEN) & MASK64
        return _mix_array(raw)

    def uniform(
        self, shape: ty.Sequence[int], low: float = 0.0, high: float = 1.0
    ) -> np.ndarray:
        """Uniform floats in [low, high) with 53 bits of mantissa."""
        count = math.prod(shape)
        raw = self.next_u64(count) >> np.uint64(11)
        res = raw.astype(np.float64) * (1.0 / (1 << 53))
        return (low + (high - low) * res).reshape(tuple(shape))

    def normal(
        self, shape: ty.Sequence[int], std: float = 1.0, mean: float = 0.0
    ) -> np.ndarray:
        """Box-Muller transform; always consumes 2 * prod(shape) values."""
        count = math.prod(shape)
        u1 = 1.0 - self.uniform((count,))  # (0, 1]
        u2 = self.uniform((count,))
        res = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
        return (mean + std * res).reshape(tuple(shape))

    def integers(self, low: int, high: int, count: int) -> np.ndarray:
        """Integers in [low, high)."""
        if high <= low:
            raise ValueError

        span = high - low
        vals = np.floor(self.uniform((count,)) * span).astype(np.int64)
        return low + np.minimum(vals, span - 1)

    def randint(self, low: int, high: int) -> int:
        return int(self.integers(low, high, 1)[0])

    def random(self) -> float:
        return float(self.uniform((1,))[0])

    def permutation(self, count: int) -> np.ndarray:
        keys = self.uniform((count,))
        return np.argsort(keys, kind="stable")

    def spawn(self, *keys: int | str) -> SplitMix64:
        return SplitMix64(derive_seed(self.state, *keys))
