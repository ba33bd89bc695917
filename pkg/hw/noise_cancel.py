"""Noise-cancellation lanes fed by per-lane LFSR pairs."""
import copy
import logging
import math
from typing import List, Sequence, Tuple

import numpy as np

from hw.config import HwConfig
from hw.fixed_point import FxTensor, QFormat, saturate
from hw.lfsr import PERIOD, Lfsr
from hw.unc import gauss_gen, unc_z1_words
from utils.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)


class LfsrBank:
    """Two LFSRs (U1 and U2 sources) per cancellation lane, all seeded distinctly."""

    def __init__(self, seeds: Sequence[Tuple[int, int]]):
        flat = [s for pair in seeds for s in pair]
        if not flat:
            raise ConfigError("LFSR bank needs at least one lane")
        if len(set(flat)) != len(flat):
            raise ConfigError(f"LFSR seeds must be distinct, got {flat}")
        if any(not 0 < s <= PERIOD for s in flat):
            raise ConfigError("LFSR seeds must be nonzero 16-bit values")
        self.lanes: List[Tuple[Lfsr, Lfsr]] = [(Lfsr(a), Lfsr(b)) for a, b in seeds]

    @classmethod
    def from_master_seed(cls, master_seed: int, lanes: int) -> "LfsrBank":
        rng = np.random.default_rng(master_seed)
        seeds = rng.choice(np.arange(1, PERIOD + 1), size=2 * lanes, replace=False)
        return cls([(int(seeds[2 * i]), int(seeds[2 * i + 1])) for i in range(lanes)])

    @property
    def num_lanes(self) -> int:
        return len(self.lanes)

    def clone(self) -> "LfsrBank":
        return copy.deepcopy(self)

    def z1(self, count: int, q: QFormat = QFormat(), lut_bits: int = 10) -> np.ndarray:
        """Raw Z1 for ``count`` elements in element order; element i is served by lane i % lanes."""
        out = np.zeros(count, dtype=np.int64)
        for lane, (u1_source, u2_source) in enumerate(self.lanes):
            idx = np.arange(lane, count, self.num_lanes)
            if idx.size == 0:
                continue
            out[idx] = unc_z1_words(u1_source.words(idx.size), u2_source.words(idx.size), q, lut_bits)
        return out


def noise_cancel(x_q: FxTensor, mu_q: FxTensor, sigma_q: FxTensor, bank: LfsrBank,
                 cfg: HwConfig = HwConfig()) -> Tuple[FxTensor, int]:
    """Subtract a hardware Gaussian sample from every element.

    Returns:
        (x_hat, cycles) with cycles = ceil(elements / lanes) + pipeline depth
    """
    if not x_q.shape == mu_q.shape == sigma_q.shape:
        raise ShapeError(
            f"noise_cancel: shapes differ x={x_q.shape} mu={mu_q.shape} sigma={sigma_q.shape}"
        )
    if bank.num_lanes != cfg.num_cancel_lanes:
        raise ConfigError(
            f"LFSR bank has {bank.num_lanes} lanes, config expects {cfg.num_cancel_lanes}"
        )
    q = x_q.q
    count = x_q.raw.size
    z1 = bank.z1(count, q, cfg.lut_bits)
    noise = gauss_gen(z1, mu_q.raw.reshape(-1), sigma_q.raw.reshape(-1), q)
    x_hat = saturate(x_q.raw.reshape(-1) - noise, q).reshape(x_q.shape)
    cycles = math.ceil(count / cfg.num_cancel_lanes) + cfg.cancel_pipeline_depth
    logger.debug(f"noise_cancel: {count} elements over {cfg.num_cancel_lanes} lanes, {cycles} cycles")
    return FxTensor(x_hat, q), cycles
