"""Deterministic random streams split per (call, sample, layer)."""
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
import torch


class StreamTag(IntEnum):
    HW_NOISE = 0
    EPSILON = 1


def derive_seed(*keys: int) -> int:
    """Mix integer keys into a 63-bit seed."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


@dataclass
class RngState:
    """Master seed plus a counter of forward passes drawn so far.

    Every forward pass takes a fresh call index, so each pass sees fresh noise
    while the whole sequence stays a function of the master seed.
    """

    seed: int = 0
    calls: int = 0

    def next_call(self) -> int:
        call = self.calls
        self.calls += 1
        return call

    def generator(self, call: int, sample: int, layer: int, tag: StreamTag) -> torch.Generator:
        return torch.Generator().manual_seed(derive_seed(self.seed, call, sample, layer, int(tag)))

    def normal(self, shape, call: int, layer: int, tag: StreamTag,
               dtype: torch.dtype = torch.float32) -> torch.Tensor:
        """Standard normal tensor of ``shape``; sample ``i`` drawn from its own stream."""
        samples = [
            torch.randn(tuple(shape[1:]), generator=self.generator(call, i, layer, tag), dtype=dtype)
            for i in range(shape[0])
        ]
        return torch.stack(samples) if samples else torch.empty(tuple(shape), dtype=dtype)
