"""Additive Gaussian activation noise modeling analog MVM non-idealities."""
import logging
from typing import List, Literal, Optional

import torch
from pydantic import BaseModel, ConfigDict, Field

from noise.rng import RngState, StreamTag
from utils.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)


class NoiseEntry(BaseModel):
    """Noise applied to the output of one layer."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    layer_index: int = Field(ge=0)
    sigma_pct: float = Field(ge=0.0, allow_inf_nan=False)
    mean: float = Field(0.0, allow_inf_nan=False)

    @property
    def is_zero(self) -> bool:
        return self.sigma_pct == 0.0 and self.mean == 0.0


class NoiseSpec(BaseModel):
    """Per-layer noise configuration.

    ``relative`` mode scales sigma by the per-sample feature magnitude of the
    clean activation; ``constant`` mode treats sigma_pct/100 as an absolute std.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    entries: List[NoiseEntry] = Field(default_factory=list)
    seed: int = 0
    sigma_mode: Literal["relative", "constant"] = "relative"

    def entry_for(self, layer_index: int) -> Optional[NoiseEntry]:
        for entry in self.entries:
            if entry.layer_index == layer_index:
                return entry
        return None

    @classmethod
    def all_conv(cls, model, sigma_pct: float, mean: float = 0.0, seed: int = 0,
                 sigma_mode: str = "relative") -> "NoiseSpec":
        """Noise after every convolution layer of ``model``."""
        return cls.for_layers(model.conv_indices(), sigma_pct, mean, seed, sigma_mode)

    @classmethod
    def for_layers(cls, layers, sigma_pct: float, mean: float = 0.0, seed: int = 0,
                   sigma_mode: str = "relative") -> "NoiseSpec":
        entries = [NoiseEntry(layer_index=i, sigma_pct=sigma_pct, mean=mean) for i in layers]
        return cls(entries=entries, seed=seed, sigma_mode=sigma_mode)


def feature_magnitude(x: torch.Tensor) -> torch.Tensor:
    """Per-sample mean absolute value of a feature map.

    Returns:
        Tensor of shape (n,).
    """
    if x.numel() == 0:
        raise ShapeError(f"feature_magnitude: empty tensor of shape {tuple(x.shape)}")
    return x.detach().abs().flatten(start_dim=1).mean(dim=1)


def sample_noise(x: torch.Tensor, entry: NoiseEntry, rng: RngState, call: int,
                 sigma_mode: str = "relative") -> torch.Tensor:
    """Draw the additive noise tensor z for activation ``x``.

    Sigma is computed from the pre-noise activation and detached, so z acts as
    a constant in the backward pass.
    """
    if sigma_mode == "relative":
        sigma = entry.sigma_pct / 100.0 * feature_magnitude(x)
    else:
        sigma = torch.full((x.shape[0],), entry.sigma_pct / 100.0, dtype=x.dtype)
    sigma = sigma.to(x.dtype).reshape((-1,) + (1,) * (x.dim() - 1))
    standard = rng.normal(x.shape, call, entry.layer_index, StreamTag.HW_NOISE, dtype=x.dtype)
    return standard * sigma + entry.mean


def inject(x: torch.Tensor, entry: NoiseEntry, rng: RngState, call: int = 0,
           sigma_mode: str = "relative") -> torch.Tensor:
    """Return x + z with z ~ N(mean, (sigma_pct/100 * |x|_mean)^2) per sample."""
    if entry.is_zero:
        return x
    return x + sample_noise(x, entry, rng, call, sigma_mode)


def apply_noise_spec(model, spec: NoiseSpec):
    """Copy of ``model`` with noise flags set from ``spec``.

    Raises:
        ConfigError: An entry references a layer that does not exist.
    """
    for entry in spec.entries:
        if entry.layer_index >= len(model.layers):
            raise ConfigError(
                f"Noise spec references layer {entry.layer_index}, "
                f"model has {len(model.layers)} layers"
            )

    noisy = model.copy()
    enabled = {entry.layer_index for entry in spec.entries}
    for index, layer in enumerate(noisy.layers):
        layer.noise_enabled = index in enabled
    noisy.noise_spec = spec
    logger.info(f"Noise enabled on layers {sorted(enabled)} ({spec.sigma_mode} sigma)")
    return noisy
