"""CIFAR-10 binary batch reader and writer."""
import logging
from pathlib import Path
from typing import Iterable, Union

import numpy as np
import torch

from dataset.base import Dataset
from utils.errors import DatasetFormatError

logger = logging.getLogger(__name__)

IMAGE_BYTES = 3 * 32 * 32
RECORD_BYTES = 1 + IMAGE_BYTES
TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
TEST_FILE = "test_batch.bin"


def parse_cifar10(data: bytes, source: str = "<bytes>", classes: int = 10) -> Dataset:
    """Decode records of 1 label byte + 3072 CHW pixel bytes."""
    if len(data) % RECORD_BYTES != 0:
        raise DatasetFormatError(
            f"{source}: length {len(data)} is not a multiple of {RECORD_BYTES}-byte records"
        )
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() >= classes:
        raise DatasetFormatError(f"{source}: label {labels.max()} outside [0, {classes})")
    images = records[:, 1:].reshape(-1, 3, 32, 32).astype(np.float32) / 255.0
    return Dataset(images=torch.from_numpy(images), labels=torch.from_numpy(labels), classes=classes)


def load_cifar10(paths: Union[str, Path, Iterable[Union[str, Path]]]) -> Dataset:
    """Load and concatenate CIFAR-10 binary batch files.

    Args:
        paths: One file or several files, read in the given order

    Returns:
        Dataset with pixels scaled to [0, 1].
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    parts = []
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"CIFAR-10 batch not found: {path}")
        parts.append(parse_cifar10(path.read_bytes(), source=str(path)))
        logger.debug(f"Read {len(parts[-1])} records from {path}")
    if not parts:
        raise DatasetFormatError("load_cifar10: no batch files given")
    return Dataset.concat(parts)


def write_cifar10(dataset: Dataset, path: Union[str, Path]) -> str:
    """Write a dataset in CIFAR-10 binary layout (pixels rounded to bytes)."""
    if tuple(dataset.images.shape[1:]) != (3, 32, 32):
        raise DatasetFormatError(f"write_cifar10 needs (n, 3, 32, 32) images, got {tuple(dataset.images.shape)}")
    pixels = np.rint(dataset.images.numpy() * 255.0).clip(0, 255).astype(np.uint8)
    records = np.concatenate(
        [dataset.labels.numpy().astype(np.uint8).reshape(-1, 1), pixels.reshape(len(dataset), -1)], axis=1
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(records.tobytes())
    return str(path)
