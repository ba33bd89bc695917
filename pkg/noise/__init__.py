"""Gaussian activation noise modeling analog MVM non-idealities."""
from .injection import NoiseEntry, NoiseSpec, apply_noise_spec, feature_magnitude, inject, sample_noise
from .rng import RngState, StreamTag, derive_seed

__all__ = [
    "NoiseEntry", "NoiseSpec", "apply_noise_spec", "feature_magnitude", "inject", "sample_noise",
    "RngState", "StreamTag", "derive_seed",
]
