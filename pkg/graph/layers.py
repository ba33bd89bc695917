"""Layer zoo shared by the backbone and the denoising blocks."""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F

from utils.errors import ShapeError

# Fixed everywhere so the hardware can apply it as an arithmetic shift by 7.
LEAKY_SLOPE = 1.0 / 128


class LayerKind(str, Enum):
    CONV2D = "conv2d"
    DEPTHWISE = "depthwise-conv2d"
    POINTWISE = "pointwise-conv2d"
    LEAKY_RELU = "leaky-relu"
    GLOBAL_AVG_POOL = "global-avg-pool"
    LINEAR = "linear"


CONV_KINDS = frozenset({LayerKind.CONV2D, LayerKind.DEPTHWISE, LayerKind.POINTWISE})
MVM_KINDS = CONV_KINDS | {LayerKind.LINEAR}


@dataclass
class LayerDesc:
    """One layer of a ModelGraph.

    Convolution weights are (out_channels, in_channels / groups, kernel, kernel),
    linear weights are (out_channels, in_channels).
    """

    kind: LayerKind
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 1
    stride: int = 1
    padding: int = 0
    weight: Optional[torch.Tensor] = None
    bias: Optional[torch.Tensor] = None
    trainable: bool = True
    noise_enabled: bool = False
    name: str = ""

    def __post_init__(self):
        self.kind = LayerKind(self.kind)
        if self.kind == LayerKind.POINTWISE and self.kernel != 1:
            raise ShapeError(f"{self.label}: pointwise layers need kernel=1, got {self.kernel}")
        if self.kind == LayerKind.DEPTHWISE and self.out_channels != self.in_channels:
            raise ShapeError(
                f"{self.label}: depthwise layers need out_channels == in_channels, "
                f"got {self.in_channels}->{self.out_channels}"
            )
        if self.stride < 1 or self.padding < 0:
            raise ShapeError(f"{self.label}: invalid stride={self.stride} padding={self.padding}")

        expected = self.weight_shape()
        if expected is not None:
            if self.weight is None:
                raise ShapeError(f"{self.label}: missing weight tensor")
            if tuple(self.weight.shape) != expected:
                raise ShapeError(
                    f"{self.label}: weight shape {tuple(self.weight.shape)} != expected {expected}"
                )
            if self.bias is not None and tuple(self.bias.shape) != (self.out_channels,):
                raise ShapeError(
                    f"{self.label}: bias shape {tuple(self.bias.shape)} != ({self.out_channels},)"
                )
        self.set_trainable(self.trainable)

    @property
    def label(self) -> str:
        return self.name or self.kind.value

    @property
    def groups(self) -> int:
        return self.in_channels if self.kind == LayerKind.DEPTHWISE else 1

    def weight_shape(self) -> Optional[Tuple[int, ...]]:
        return weight_shape(self.kind, self.in_channels, self.out_channels, self.kernel)

    def params(self) -> Dict[str, torch.Tensor]:
        """Named parameter tensors of this layer."""
        named = {}
        if self.weight is not None:
            named["weight"] = self.weight
        if self.bias is not None:
            named["bias"] = self.bias
        return named

    def set_trainable(self, trainable: bool) -> None:
        self.trainable = trainable
        for tensor in self.params().values():
            tensor.requires_grad_(trainable)

    def output_shape(self, input_shape: Sequence[int]) -> Tuple[int, ...]:
        """Shape produced from ``input_shape`` (validated)."""
        if self.kind in CONV_KINDS:
            n, c, h, w = _expect_4d(self, input_shape)
            _expect_channels(self, c)
            h_out = (h + 2 * self.padding - self.kernel) // self.stride + 1
            w_out = (w + 2 * self.padding - self.kernel) // self.stride + 1
            if h_out < 1 or w_out < 1:
                raise ShapeError(f"{self.label}: input {h}x{w} too small for kernel {self.kernel}")
            return (n, self.out_channels, h_out, w_out)
        if self.kind == LayerKind.LINEAR:
            if len(input_shape) != 2:
                raise ShapeError(f"{self.label}: expected 2-D input, got shape {tuple(input_shape)}")
            _expect_channels(self, input_shape[1])
            return (input_shape[0], self.out_channels)
        if self.kind == LayerKind.GLOBAL_AVG_POOL:
            n, c, _, _ = _expect_4d(self, input_shape)
            return (n, c)
        return tuple(input_shape)


def weight_shape(kind: LayerKind, in_channels: int, out_channels: int,
                 kernel: int) -> Optional[Tuple[int, ...]]:
    """Parameter shape for an MVM layer, None for parameter-free kinds."""
    if kind in CONV_KINDS:
        groups = in_channels if kind == LayerKind.DEPTHWISE else 1
        return (out_channels, in_channels // groups, kernel, kernel)
    if kind == LayerKind.LINEAR:
        return (out_channels, in_channels)
    return None


def _expect_4d(layer: LayerDesc, shape: Sequence[int]) -> Tuple[int, int, int, int]:
    if len(shape) != 4:
        raise ShapeError(f"{layer.label}: expected NCHW input, got shape {tuple(shape)}")
    return tuple(shape)


def _expect_channels(layer: LayerDesc, channels: int) -> None:
    if channels != layer.in_channels:
        raise ShapeError(
            f"{layer.label}: input has {channels} channels, layer expects {layer.in_channels}"
        )


def conv2d(x: torch.Tensor, layer: LayerDesc) -> torch.Tensor:
    """Direct 2-D convolution (standard, depthwise or pointwise)."""
    layer.output_shape(x.shape)
    return F.conv2d(x, layer.weight, layer.bias, stride=layer.stride,
                    padding=layer.padding, groups=layer.groups)


def leaky_relu(x: torch.Tensor, slope: float = LEAKY_SLOPE) -> torch.Tensor:
    """Elementwise max(x, slope * x)."""
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must be in (0, 1), got {slope}")
    return torch.maximum(x, x * slope)


def global_avg_pool(x: torch.Tensor) -> torch.Tensor:
    return x.mean(dim=(2, 3))


def linear(x: torch.Tensor, layer: LayerDesc) -> torch.Tensor:
    layer.output_shape(x.shape)
    return F.linear(x, layer.weight, layer.bias)


def apply_layer(x: torch.Tensor, layer: LayerDesc) -> torch.Tensor:
    """Run one layer on ``x``."""
    if layer.kind in CONV_KINDS:
        return conv2d(x, layer)
    if layer.kind == LayerKind.LEAKY_RELU:
        return leaky_relu(x)
    if layer.kind == LayerKind.GLOBAL_AVG_POOL:
        layer.output_shape(x.shape)
        return global_avg_pool(x)
    return linear(x, layer)


def kaiming_uniform(shape: Sequence[int], fan_in: int, generator: torch.Generator,
                    slope: float = LEAKY_SLOPE) -> torch.Tensor:
    bound = math.sqrt(6.0 / ((1.0 + slope ** 2) * fan_in))
    return (torch.rand(tuple(shape), generator=generator) * 2.0 - 1.0) * bound


def make_layer(kind: LayerKind, in_channels: int = 0, out_channels: int = 0, kernel: int = 1,
               stride: int = 1, padding: int = 0, generator: Optional[torch.Generator] = None,
               zero: bool = False, name: str = "", trainable: bool = True) -> LayerDesc:
    """Build a layer with Kaiming-uniform weights (or zeros) and a bias."""
    kind = LayerKind(kind)
    if kind not in MVM_KINDS:
        return LayerDesc(kind=kind, in_channels=in_channels, out_channels=in_channels,
                         name=name, trainable=trainable)

    if kind == LayerKind.DEPTHWISE:
        out_channels = in_channels
    shape = weight_shape(kind, in_channels, out_channels, kernel)
    fan_in = int(math.prod(shape[1:]))

    if zero:
        weight = torch.zeros(shape)
        bias = torch.zeros(out_channels)
    else:
        generator = generator or torch.Generator().manual_seed(0)
        weight = kaiming_uniform(shape, fan_in, generator)
        bias_bound = 1.0 / math.sqrt(fan_in)
        bias = (torch.rand(out_channels, generator=generator) * 2.0 - 1.0) * bias_bound

    return LayerDesc(kind=kind, in_channels=in_channels, out_channels=out_channels,
                     kernel=kernel, stride=stride, padding=padding, weight=weight,
                     bias=bias, trainable=trainable, name=name)
