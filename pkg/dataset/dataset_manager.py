"""Dataset manager resolving the configured dataset into train/val/test splits."""
import logging
from pathlib import Path
from typing import Dict, Optional

import torch

from dataset.base import Dataset
from dataset.cifar import TEST_FILE, TRAIN_FILES, load_cifar10, write_cifar10
from dataset.synthetic import gen_synthetic

logger = logging.getLogger(__name__)


class DatasetManager:
    """Loads the configured dataset once and serves deterministic splits."""

    def __init__(self, config):
        """Initialize dataset manager.

        Args:
            config: ExperimentConfig
        """
        self.config = config
        self.dataset_config = config.dataset
        self._splits: Optional[Dict[str, Dataset]] = None

        logger.info(f"Dataset manager initialized ({self.dataset_config.kind})")

    def _load(self) -> Dict[str, Dataset]:
        settings = self.dataset_config
        if settings.kind == "cifar10":
            train_full, test = self._load_cifar(settings.cifar_dir)
        else:
            train_full = gen_synthetic(self.config.seed, settings.synthetic_train,
                                       settings.classes, settings.image_size)
            test = gen_synthetic(self.config.seed + 1, settings.synthetic_test,
                                 settings.classes, settings.image_size)

        train, val = train_full.split(settings.validation_split, seed=self.config.seed)
        logger.info(f"Dataset split: {len(train)} train, {len(val)} validation, {len(test)} test")
        return {"train": train, "val": val, "test": test}

    def _load_cifar(self, cifar_dir: Optional[str]):
        if not cifar_dir:
            raise FileNotFoundError(
                "CIFAR-10 selected but no directory configured: set dataset.cifar_dir "
                "or ANMD_CIFAR_DIR to the extracted cifar-10-batches-bin folder"
            )
        root = Path(cifar_dir)
        missing = [name for name in TRAIN_FILES + [TEST_FILE] if not (root / name).exists()]
        if missing:
            raise FileNotFoundError(
                f"CIFAR-10 directory {root} is missing {', '.join(missing)}; download and extract "
                f"the binary version (cifar-10-binary.tar.gz) there"
            )
        return load_cifar10([root / name for name in TRAIN_FILES]), load_cifar10(root / TEST_FILE)

    def get(self, split: str) -> Dataset:
        """Return the ``train``, ``val`` or ``test`` split."""
        if self._splits is None:
            self._splits = self._load()
        return self._splits[split]

    def calibration_batch(self, count: int) -> Dataset:
        """First ``count`` training samples (already in shuffled split order)."""
        return self.get("train").head(count)

    def get_dataset_stats(self) -> Dict[str, int]:
        """Sample counts per split."""
        return {split: len(self.get(split)) for split in ("train", "val", "test")}

    def export_synthetic(self, out_dir: str) -> Dict[str, str]:
        """Write the synthetic train/test sets as CIFAR-10 binary batches."""
        settings = self.dataset_config
        if settings.image_size != 32:
            raise ValueError("Only 32x32 synthetic datasets can be exported in CIFAR-10 layout")
        train = gen_synthetic(self.config.seed, settings.synthetic_train, settings.classes, 32)
        test = gen_synthetic(self.config.seed + 1, settings.synthetic_test, settings.classes, 32)
        root = Path(out_dir)
        written = {}
        chunks = torch.arange(len(train)).tensor_split(len(TRAIN_FILES))
        for name, chunk in zip(TRAIN_FILES, chunks):
            written[name] = write_cifar10(train.subset(chunk), root / name)
        written[TEST_FILE] = write_cifar10(test, root / TEST_FILE)
        logger.info(f"Exported synthetic dataset to {root}")
        return written
