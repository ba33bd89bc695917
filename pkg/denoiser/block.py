"""Bottleneck denoising block: pointwise reduce, depthwise 3x3, mean/scale heads."""
import logging
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import torch

from graph.layers import LayerDesc, LayerKind, conv2d, leaky_relu, make_layer
from utils.errors import ShapeError

logger = logging.getLogger(__name__)

DEFAULT_RATIO = 0.25

CONV_NAMES = ("pw_reduce", "dw", "head_mean", "head_scale")


def bottleneck_channels(channels: int, ratio: float = DEFAULT_RATIO) -> int:
    return max(1, int(channels * ratio))


@dataclass
class DenoiserParams:
    """The four convolutions of one denoising block."""

    channels: int
    ratio: float
    pw_reduce: LayerDesc
    dw: LayerDesc
    head_mean: LayerDesc
    head_scale: LayerDesc

    @property
    def bottleneck(self) -> int:
        return self.pw_reduce.out_channels

    def convs(self) -> Dict[str, LayerDesc]:
        return {name: getattr(self, name) for name in CONV_NAMES}

    def named_parameters(self) -> Dict[str, torch.Tensor]:
        named = {}
        for conv_name, layer in self.convs().items():
            for key, tensor in layer.params().items():
                named[f"{conv_name}.{key}"] = tensor
        return named

    def parameter_count(self) -> int:
        return sum(t.numel() for t in self.named_parameters().values())

    def cast(self, dtype: torch.dtype) -> None:
        for layer in self.convs().values():
            layer.weight = layer.weight.detach().to(dtype)
            layer.bias = layer.bias.detach().to(dtype)
            layer.set_trainable(layer.trainable)


def denoiser_init(channels: int, ratio: float = DEFAULT_RATIO, seed: int = 0) -> DenoiserParams:
    """Fresh block: random trunk, zero heads (exact identity until trained)."""
    if channels < 1 or not 0.0 < ratio <= 1.0:
        raise ValueError(f"denoiser_init needs channels >= 1 and 0 < ratio <= 1, got {channels}, {ratio}")

    reduced = bottleneck_channels(channels, ratio)
    generator = torch.Generator().manual_seed(seed)
    return DenoiserParams(
        channels=channels,
        ratio=ratio,
        pw_reduce=make_layer(LayerKind.POINTWISE, channels, reduced, generator=generator,
                             name="pw_reduce"),
        dw=make_layer(LayerKind.DEPTHWISE, reduced, reduced, kernel=3, padding=1,
                      generator=generator, name="dw"),
        head_mean=make_layer(LayerKind.POINTWISE, reduced, channels, zero=True, name="head_mean"),
        head_scale=make_layer(LayerKind.POINTWISE, reduced, channels, zero=True, name="head_scale"),
    )


def denoiser_param_count(channels: int, ratio: float = DEFAULT_RATIO) -> int:
    reduced = bottleneck_channels(channels, ratio)
    return (channels * reduced + reduced) + (9 * reduced + reduced) + 2 * (reduced * channels + channels)


def denoiser_forward(x: torch.Tensor, params: DenoiserParams,
                     eps: Union[torch.Tensor, torch.Generator]
                     ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Predict noise statistics, sample Z = eps * sigma + mu and subtract it.

    Args:
        x: Noisy activation (n, C, h, w)
        params: Block parameters
        eps: Standard normal tensor shaped like ``x`` or a generator to draw it

    Returns:
        (x_hat, mu, sigma)
    """
    if x.dim() != 4 or x.shape[1] != params.channels:
        raise ShapeError(
            f"denoiser: input shape {tuple(x.shape)} does not match {params.channels} channels"
        )
    if isinstance(eps, torch.Generator):
        eps = torch.randn(x.shape, generator=eps, dtype=x.dtype)

    trunk = leaky_relu(conv2d(leaky_relu(conv2d(x, params.pw_reduce)), params.dw))
    mu = conv2d(trunk, params.head_mean)
    sigma = conv2d(trunk, params.head_scale)
    z_hat = eps * sigma + mu
    return x - z_hat, mu, sigma


def denoiser_noise_var(sigma: torch.Tensor) -> torch.Tensor:
    """Reported noise variance for a predicted scale."""
    return sigma * sigma
