"""Shared fixtures: tiny models, synthetic datasets, float64 copies."""
import os
import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from dataset.synthetic import gen_synthetic  # noqa: E402
from graph.layers import LayerKind, make_layer  # noqa: E402
from graph.model import ModelGraph, small_cnn  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run end-to-end trend tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end runs, need --runslow")
    config.addinivalue_line("markers", "cifar: needs ANMD_CIFAR_DIR")


def pytest_collection_modifyitems(config, items):
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    skip_cifar = pytest.mark.skip(reason="ANMD_CIFAR_DIR not set")
    for item in items:
        if "slow" in item.keywords and not config.getoption("--runslow"):
            item.add_marker(skip_slow)
        if "cifar" in item.keywords and not os.getenv("ANMD_CIFAR_DIR"):
            item.add_marker(skip_cifar)


@pytest.fixture(autouse=True)
def _isolate_env(monkeypatch):
    for name in ("ANMD_OUTPUT_DIR", "ANMD_SEED", "ANMD_DATASET_KIND"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def cnn():
    return small_cnn(classes=10, seed=0)


@pytest.fixture
def cnn64(cnn):
    return cnn.to(torch.float64)


@pytest.fixture
def tiny_data():
    return gen_synthetic(seed=3, n=32, classes=10, size=8)


@pytest.fixture
def toy_net():
    """Three conv layers (4, 8, 4 channels) on 3x6x6 inputs, then pool and linear."""
    generator = torch.Generator().manual_seed(7)
    layers = [
        make_layer(LayerKind.CONV2D, 3, 4, kernel=3, padding=1, generator=generator, name="c0"),
        make_layer(LayerKind.LEAKY_RELU, 4, name="a0"),
        make_layer(LayerKind.CONV2D, 4, 8, kernel=3, padding=1, generator=generator, name="c1"),
        make_layer(LayerKind.LEAKY_RELU, 8, name="a1"),
        make_layer(LayerKind.CONV2D, 8, 4, kernel=3, padding=1, generator=generator, name="c2"),
        make_layer(LayerKind.GLOBAL_AVG_POOL, 4, name="pool"),
        make_layer(LayerKind.LINEAR, 4, 3, generator=generator, name="fc"),
    ]
    return ModelGraph(layers=layers, name="toy", classes=3)
