"""Dataset module for CIFAR-10 and synthetic image datasets."""
from .base import Dataset
from .cifar import load_cifar10, parse_cifar10, write_cifar10
from .dataset_manager import DatasetManager
from .synthetic import gen_synthetic

__all__ = ["Dataset", "DatasetManager", "gen_synthetic", "load_cifar10", "parse_cifar10", "write_cifar10"]
