"""Uniform-to-normal converter (Box-Muller, Z1 only) and Gaussian generator."""
import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from hw.fixed_point import QFormat, round_shift, saturate
from hw.lfsr import WIDTH
from utils.errors import HardwareError

logger = logging.getLogger(__name__)

RADIUS_FRAC = 12  # sqrt(-2 ln u) table, Q4.12
COS_FRAC = 14     # cos(2 pi u) table, Q2.14


@lru_cache(maxsize=8)
def build_luts(lut_bits: int = 10) -> Tuple[np.ndarray, np.ndarray]:
    """(radius, cosine) lookup tables with 2^lut_bits entries each.

    The radius table samples bin centers of u1; the cosine table samples bin
    starts of u2 with quarter-period entries pinned to exactly 1, 0, -1, 0.
    """
    size = 1 << lut_bits
    centers = (np.arange(size) + 0.5) / size
    radius = np.rint(np.sqrt(-2.0 * np.log(centers)) * (1 << RADIUS_FRAC)).astype(np.int64)

    cosine = np.rint(np.cos(2.0 * np.pi * np.arange(size) / size) * (1 << COS_FRAC)).astype(np.int64)
    if size >= 4:
        one = 1 << COS_FRAC
        cosine[0], cosine[size // 4], cosine[size // 2], cosine[3 * size // 4] = one, 0, -one, 0
    return radius, cosine


def _indices(u: np.ndarray, lut_bits: int) -> np.ndarray:
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise HardwareError("UNC inputs must lie strictly inside (0, 1)")
    return np.minimum(np.floor(u * (1 << lut_bits)).astype(np.int64), (1 << lut_bits) - 1)


def _z1_from_indices(i1: np.ndarray, i2: np.ndarray, q: QFormat, lut_bits: int) -> np.ndarray:
    radius, cosine = build_luts(lut_bits)
    product = radius[i1] * cosine[i2]
    return saturate(round_shift(product, RADIUS_FRAC + COS_FRAC - q.frac_bits), q)


def unc_z1(u1: Union[float, np.ndarray], u2: Union[float, np.ndarray], q: QFormat = QFormat(),
           lut_bits: int = 10) -> np.ndarray:
    """Raw Z1 = sqrt(-2 ln u1) * cos(2 pi u2) in the working Q-format."""
    i1 = _indices(np.asarray(u1, dtype=np.float64), lut_bits)
    i2 = _indices(np.asarray(u2, dtype=np.float64), lut_bits)
    return _z1_from_indices(i1, i2, q, lut_bits)


def unc_z1_words(w1: np.ndarray, w2: np.ndarray, q: QFormat = QFormat(), lut_bits: int = 10) -> np.ndarray:
    """Z1 from raw 16-bit LFSR words (the LUT index is the top ``lut_bits`` bits)."""
    if np.any((w1 <= 0) | (w2 <= 0)):
        raise HardwareError("LFSR words must be nonzero")
    shift = WIDTH - lut_bits
    return _z1_from_indices(np.asarray(w1) >> shift, np.asarray(w2) >> shift, q, lut_bits)


def gauss_gen(z1: np.ndarray, mu: np.ndarray, sigma: np.ndarray, q: QFormat = QFormat()) -> np.ndarray:
    """Raw Y = sat(round(Z1 * sigma) + mu)."""
    product = np.asarray(z1, dtype=np.int64) * np.asarray(sigma, dtype=np.int64)
    return saturate(round_shift(product, q.frac_bits) + np.asarray(mu, dtype=np.int64), q)


def dump_luts(out_dir: str, lut_bits: int = 10) -> Dict[str, str]:
    """Write both tables as one 16-bit hex word per line."""
    radius, cosine = build_luts(lut_bits)
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, table in (("radius_q4_12.hex", radius), ("cos_q2_14.hex", cosine)):
        path = root / name
        path.write_text("".join(f"{int(v) & 0xFFFF:04x}\n" for v in table))
        written[name] = str(path)
    logger.info(f"Dumped {1 << lut_bits}-entry LUTs to {root}")
    return written
