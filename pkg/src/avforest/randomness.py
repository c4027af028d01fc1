"""Seeding and the deterministic stream-split rule.

All Monte Carlo state is derived from a 64-bit experiment seed and a
realization index through one documented function:

    SeedSequence(seed, spawn_key=(index,))

Child 0 of that sequence seeds the xoshiro256++ state driving the walk
kernels; child 1 seeds a numpy Generator used for everything else in the
realization (permutation draws, partial frame-identity draws, ...).
Results therefore depend only on (seed, index), never on how realizations
are distributed over workers.

The kernels consume randomness as raw 64-bit words of xoshiro256++ and
reduce to a bounded range by mask-and-reject, so the compiled and the
pure-Python backends produce bit-identical streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomSource:
    """Deterministic randomness for one realization of an experiment."""

    seed: int
    index: int = 0

    def _children(self):
        return np.random.SeedSequence(self.seed, spawn_key=(self.index,)).spawn(2)

    def kernel_state(self) -> np.ndarray:
        """Fresh xoshiro256++ state (uint64[4]) for the walk kernels."""
        walk, _ = self._children()
        state = walk.generate_state(4, dtype=np.uint64)
        if not state.any():  # xoshiro must not start at the all-zero state
            state[0] = 1
        return state

    def generator(self) -> np.random.Generator:
        """numpy Generator for non-kernel draws of this realization."""
        _, aux = self._children()
        return np.random.Generator(np.random.PCG64(aux))


def xoshiro_next(state) -> int:
    """Advance a xoshiro256++ state stored in a uint64[4] array.

    Reference implementation shared with the compiled kernel; used by the
    pure-Python backend and by low-volume walk code.
    """
    s0, s1, s2, s3 = (int(state[i]) for i in range(4))
    x = (s0 + s3) & _MASK64
    result = (((x << 23) | (x >> 41)) + s0) & _MASK64
    t = (s1 << 17) & _MASK64
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


def draw_below(state, n: int) -> int:
    """Uniform integer in [0, n) by mask-and-reject; n == 1 consumes nothing."""
    n = int(n)
    if n <= 1:
        return 0
    mask = (1 << (n - 1).bit_length()) - 1
    while True:
        r = xoshiro_next(state) & mask
        if r < n:
            return r
