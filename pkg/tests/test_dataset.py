"""CIFAR-10 binary parsing, synthetic generator and dataset manager."""
import os
from pathlib import Path

import numpy as np
import pytest
import torch

from dataset.base import Dataset
from dataset.cifar import RECORD_BYTES, TEST_FILE, TRAIN_FILES, load_cifar10, parse_cifar10, write_cifar10
from dataset.dataset_manager import DatasetManager
from dataset.synthetic import gen_synthetic
from utils.config_loader import ExperimentConfig
from utils.errors import DatasetFormatError, LabelRangeError


def _small_config(tmp_path, **dataset):
    settings = {"synthetic_train": 50, "synthetic_test": 20, "validation_split": 0.2, **dataset}
    return ExperimentConfig.model_validate({"dataset": settings, "output_dir": str(tmp_path), "seed": 1})


class TestCifar:
    def test_zero_record(self):
        record = bytes([3]) + bytes(RECORD_BYTES - 1)
        data = parse_cifar10(record)
        assert len(data) == 1
        assert data.labels.tolist() == [3]
        assert torch.count_nonzero(data.images) == 0

    def test_channel_order(self):
        pixels = np.zeros((3, 32, 32), dtype=np.uint8)
        pixels[0] = 255
        pixels[2, 0, 1] = 51
        data = parse_cifar10(bytes([1]) + pixels.tobytes())
        assert data.images[0, 0].min().item() == 1.0
        assert data.images[0, 1].max().item() == 0.0
        assert data.images[0, 2, 0, 1].item() == pytest.approx(0.2)

    def test_bad_length(self):
        with pytest.raises(DatasetFormatError, match="3073"):
            parse_cifar10(bytes(RECORD_BYTES + 5))

    def test_write_then_load(self, tmp_path):
        source = gen_synthetic(seed=2, n=6)
        path = write_cifar10(source, tmp_path / "batch.bin")
        assert Path(path).stat().st_size == 6 * RECORD_BYTES
        loaded = load_cifar10(path)
        assert torch.equal(loaded.labels, source.labels)
        assert torch.allclose(loaded.images, source.images, atol=0.5 / 255 + 1e-6)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_cifar10(tmp_path / "nope.bin")

    @pytest.mark.cifar
    def test_official_test_batch(self):
        data = load_cifar10(Path(os.environ["ANMD_CIFAR_DIR"]) / TEST_FILE)
        assert len(data) == 10000
        assert data.labels.min().item() == 0 and data.labels.max().item() == 9


class TestSynthetic:
    def test_deterministic(self):
        a = gen_synthetic(seed=7, n=64, classes=10, size=32)
        b = gen_synthetic(seed=7, n=64, classes=10, size=32)
        assert torch.equal(a.images, b.images)
        assert torch.equal(a.labels, b.labels)

    def test_range_and_shape(self):
        data = gen_synthetic(seed=1, n=16, classes=4, size=16)
        assert data.images.shape == (16, 3, 16, 16)
        assert data.images.min() >= 0.0 and data.images.max() <= 1.0
        assert data.labels.max() < 4

    def test_seeds_differ(self):
        assert not torch.equal(gen_synthetic(1, 8).images, gen_synthetic(2, 8).images)


class TestDataset:
    def test_label_range(self):
        with pytest.raises(LabelRangeError):
            Dataset(torch.zeros(2, 3, 4, 4), torch.tensor([0, 10]), classes=10)

    def test_split_is_partition(self):
        data = gen_synthetic(seed=0, n=20, size=8)
        train, held = data.split(0.25, seed=3)
        assert len(train) == 15 and len(held) == 5
        again, _ = data.split(0.25, seed=3)
        assert torch.equal(train.images, again.images)

    def test_batches_cover_everything(self):
        data = gen_synthetic(seed=0, n=10, size=8)
        seen = torch.cat([labels for _, labels in data.batches(4, shuffle=True, seed=1)])
        assert len(seen) == 10
        assert sorted(seen.tolist()) == sorted(data.labels.tolist())


class TestDatasetManager:
    def test_synthetic_splits(self, tmp_path):
        manager = DatasetManager(_small_config(tmp_path, image_size=8))
        assert manager.get_dataset_stats() == {"train": 40, "val": 10, "test": 20}
        assert len(manager.calibration_batch(8)) == 8

    def test_missing_cifar_dir_is_actionable(self, tmp_path):
        manager = DatasetManager(_small_config(tmp_path, kind="cifar10", cifar_dir=str(tmp_path)))
        with pytest.raises(FileNotFoundError, match="data_batch_1.bin"):
            manager.get("train")

    def test_export_round_trip(self, tmp_path):
        config = _small_config(tmp_path)
        written = DatasetManager(config).export_synthetic(str(tmp_path / "data"))
        assert sorted(written) == sorted(TRAIN_FILES + [TEST_FILE])

        cifar = config.model_copy(update={"dataset": config.dataset.model_copy(
            update={"kind": "cifar10", "cifar_dir": str(tmp_path / "data")})})
        stats = DatasetManager(cifar).get_dataset_stats()
        assert stats == {"train": 40, "val": 10, "test": 20}
