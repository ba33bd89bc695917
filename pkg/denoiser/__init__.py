"""Probabilistic denoising blocks."""
from .block import (DEFAULT_RATIO, DenoiserParams, bottleneck_channels, denoiser_forward,
                    denoiser_init, denoiser_noise_var, denoiser_param_count)
from .attach import attach, denoiser_overhead_pct

__all__ = [
    "DEFAULT_RATIO", "DenoiserParams", "bottleneck_channels", "denoiser_forward", "denoiser_init",
    "denoiser_noise_var", "denoiser_param_count", "attach", "denoiser_overhead_pct",
]
