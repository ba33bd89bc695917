"""Class-conditioned Gaussian blob images for fast, data-free experiments."""
import numpy as np
import torch

from dataset.base import Dataset


def _prototypes(classes: int, size: int):
    # Class centers sit on a circle, colors on evenly spaced hues; both depend
    # only on (classes, size) so every seed shares the same classes.
    angles = 2.0 * np.pi * np.arange(classes) / classes
    radius = size / 4.0
    centers = np.stack([size / 2 + radius * np.cos(angles), size / 2 + radius * np.sin(angles)], axis=1)
    hues = np.arange(classes) / classes
    colors = 0.5 + 0.5 * np.stack(
        [np.cos(2 * np.pi * (hues + shift)) for shift in (0.0, 1 / 3, 2 / 3)], axis=1
    )
    return centers, colors


def gen_synthetic(seed: int, n: int, classes: int = 10, size: int = 32) -> Dataset:
    """Generate ``n`` blob images of shape (3, size, size) with values in [0, 1]."""
    rng = np.random.default_rng(seed)
    centers, colors = _prototypes(classes, size)
    labels = rng.integers(0, classes, size=n)

    grid_y, grid_x = np.mgrid[0:size, 0:size].astype(np.float64)
    width = size / 6.0
    jitter = rng.normal(0.0, size / 16.0, size=(n, 2))
    cx = centers[labels, 0] + jitter[:, 0]
    cy = centers[labels, 1] + jitter[:, 1]
    blob = np.exp(-((grid_x[None] - cx[:, None, None]) ** 2 + (grid_y[None] - cy[:, None, None]) ** 2)
                  / (2.0 * width ** 2))
    images = 0.15 + 0.7 * colors[labels][:, :, None, None] * blob[:, None]
    images += rng.normal(0.0, 0.05, size=images.shape)
    images = np.clip(images, 0.0, 1.0).astype(np.float32)

    return Dataset(images=torch.from_numpy(images), labels=torch.from_numpy(labels.astype(np.int64)),
                   classes=classes)
