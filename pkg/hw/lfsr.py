"""16-bit Fibonacci LFSR (x^16 + x^15 + x^13 + x^4 + 1) uniform source."""
from functools import lru_cache
from typing import Tuple

import numpy as np

from utils.errors import LfsrStateError

WIDTH = 16
TAPS = (16, 15, 13, 4)
PERIOD = (1 << WIDTH) - 1
STEPS_PER_SAMPLE = 16


def _check_state(state: int) -> None:
    if not 0 < state <= PERIOD:
        raise LfsrStateError(f"LFSR state must be a nonzero 16-bit value, got {state}")


def lfsr_step_bit(state):
    """One shift: feedback = XOR of the tapped bits, shifted into the MSB.

    Works on Python ints and on numpy integer arrays.
    """
    feedback = 0
    for tap in TAPS:
        feedback ^= state >> (WIDTH - tap)
    return (state >> 1) | ((feedback & 1) << (WIDTH - 1))


@lru_cache(maxsize=1)
def _word_orbit() -> Tuple[np.ndarray, np.ndarray]:
    # Advancing 16 bit-steps is itself one 65535-cycle (gcd(16, 65535) == 1),
    # so the sample stream of any seed is a rotation of a single orbit.
    states = np.arange(1, PERIOD + 1, dtype=np.int64)
    next_word = states.copy()
    for _ in range(STEPS_PER_SAMPLE):
        next_word = lfsr_step_bit(next_word)
    table = np.zeros(PERIOD + 1, dtype=np.int64)
    table[1:] = next_word

    orbit = np.empty(PERIOD, dtype=np.int64)
    position = np.empty(PERIOD + 1, dtype=np.int64)
    state = 1
    for i in range(PERIOD):
        orbit[i] = state
        position[state] = i
        state = int(table[state])
    return orbit, position


def lfsr_next(state: int) -> Tuple[int, float]:
    """Advance 16 bit-steps and return (state', u) with u = state' / 65536 in (0, 1)."""
    _check_state(state)
    for _ in range(STEPS_PER_SAMPLE):
        state = lfsr_step_bit(state)
    return state, state / 65536.0


def lfsr_stream(state: int, count: int) -> Tuple[np.ndarray, int]:
    """The next ``count`` sample words after ``state`` and the final state."""
    _check_state(state)
    if count == 0:
        return np.empty(0, dtype=np.int64), state
    orbit, position = _word_orbit()
    steps = (position[state] + 1 + np.arange(count)) % PERIOD
    words = orbit[steps]
    return words, int(words[-1])


class Lfsr:
    """Stateful LFSR used by noise-cancellation lanes."""

    def __init__(self, seed: int):
        _check_state(seed)
        self.seed = seed
        self.state = seed

    def words(self, count: int) -> np.ndarray:
        words, self.state = lfsr_stream(self.state, count)
        return words
