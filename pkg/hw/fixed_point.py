"""Signed 16-bit fixed-point tensors and bit-exact integer convolution."""
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import torch

from graph.layers import LayerDesc, LayerKind
from utils.errors import AccumulatorOverflowError, ShapeError

ArrayLike = Union[np.ndarray, torch.Tensor, float, Sequence[float]]


@dataclass(frozen=True)
class QFormat:
    """Two's complement Q(15-f).f word with a wide MAC accumulator."""

    frac_bits: int = 8
    total_bits: int = 16
    acc_bits: int = 40

    def __post_init__(self):
        if not 1 <= self.frac_bits <= 14:
            raise ValueError(f"frac_bits must be in [1, 14], got {self.frac_bits}")

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def acc_limit(self) -> int:
        return 1 << (self.acc_bits - 1)

    @property
    def lsb(self) -> float:
        return 1.0 / self.scale


@dataclass(frozen=True)
class FxTensor:
    """Raw integer words (held as int64) plus their Q-format."""

    raw: np.ndarray
    q: QFormat

    def __post_init__(self):
        if self.raw.size and (self.raw.min() < self.q.raw_min or self.raw.max() > self.q.raw_max):
            raise ShapeError(f"FxTensor values outside the signed {self.q.total_bits}-bit range")

    @property
    def shape(self):
        return self.raw.shape


def saturate(values: np.ndarray, q: QFormat) -> np.ndarray:
    return np.clip(values, q.raw_min, q.raw_max).astype(np.int64)


def round_shift(values: np.ndarray, shift: int) -> np.ndarray:
    """Arithmetic right shift by ``shift`` bits, rounding half to even."""
    values = np.asarray(values, dtype=np.int64)
    if shift <= 0:
        return values << (-shift)
    floor = values >> shift
    remainder = values - (floor << shift)
    half = 1 << (shift - 1)
    round_up = (remainder > half) | ((remainder == half) & ((floor & 1) == 1))
    return floor + round_up.astype(np.int64)


def quantize(x: ArrayLike, q: QFormat = QFormat()) -> FxTensor:
    """Round-to-nearest-even of x * 2^f, saturated to 16 bits."""
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().double().numpy()
    scaled = np.rint(np.asarray(x, dtype=np.float64) * q.scale)
    return FxTensor(saturate(scaled, q), q)


def dequantize(x_q: FxTensor) -> torch.Tensor:
    return torch.from_numpy(x_q.raw.astype(np.float64) / x_q.q.scale).float()


def fx_leaky_relu(x_q: FxTensor) -> FxTensor:
    """Leaky ReLU with slope 1/128 as an arithmetic shift of negative words."""
    raw = np.where(x_q.raw >= 0, x_q.raw, x_q.raw >> 7)
    return FxTensor(raw.astype(np.int64), x_q.q)


def _windows(x: np.ndarray, layer: LayerDesc) -> np.ndarray:
    padded = np.pad(x, ((0, 0), (0, 0), (layer.padding, layer.padding), (layer.padding, layer.padding)))
    view = np.lib.stride_tricks.sliding_window_view(padded, (layer.kernel, layer.kernel), axis=(2, 3))
    return view[:, :, ::layer.stride, ::layer.stride]


def fx_conv(layer: LayerDesc, x_q: FxTensor, w_q: FxTensor, b_q: Optional[FxTensor] = None,
            cores: int = 1) -> FxTensor:
    """Integer convolution with a 40-bit accumulator and one rounding at writeback.

    Output channels are assigned round-robin to ``cores``; since every MAC is
    exact the result does not depend on the core count.

    Raises:
        AccumulatorOverflowError: Some partial sum could leave the accumulator.
    """
    if layer.kind not in (LayerKind.CONV2D, LayerKind.POINTWISE, LayerKind.DEPTHWISE):
        raise ShapeError(f"{layer.label}: fx_conv supports convolution layers only")
    n, c, h, w = x_q.shape
    out_shape = layer.output_shape((n, c, h, w))
    q = x_q.q

    windows = _windows(x_q.raw, layer)
    weights = w_q.raw
    acc = np.zeros(out_shape, dtype=np.int64)
    bound = np.zeros(out_shape, dtype=np.int64)
    for core in range(cores):
        channels = np.arange(core, layer.out_channels, cores)
        if channels.size == 0:
            continue
        if layer.kind == LayerKind.DEPTHWISE:
            acc[:, channels] = np.einsum("nchwij,cij->nchw", windows[:, channels], weights[channels, 0])
            bound[:, channels] = np.einsum("nchwij,cij->nchw", np.abs(windows[:, channels]),
                                           np.abs(weights[channels, 0]))
        else:
            acc[:, channels] = np.einsum("nchwij,ocij->nohw", windows, weights[channels])
            bound[:, channels] = np.einsum("nchwij,ocij->nohw", np.abs(windows), np.abs(weights[channels]))

    if b_q is not None:
        bias = b_q.raw.astype(np.int64) << q.frac_bits
        acc += bias.reshape(1, -1, 1, 1)
        bound += np.abs(bias).reshape(1, -1, 1, 1)
    if bound.size and bound.max() >= q.acc_limit:
        raise AccumulatorOverflowError(
            f"{layer.label}: partial sums reach {int(bound.max())}, accumulator limit {q.acc_limit}"
        )
    return FxTensor(saturate(round_shift(acc, q.frac_bits), q), q)
