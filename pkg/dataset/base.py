"""Labeled image dataset."""
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import torch

from utils.errors import LabelRangeError, ShapeError


@dataclass(frozen=True)
class Dataset:
    """Images (n, 3, h, w) in [0, 1] with integer labels in [0, classes)."""

    images: torch.Tensor
    labels: torch.Tensor
    classes: int = 10

    def __post_init__(self):
        if self.images.dim() != 4:
            raise ShapeError(f"Dataset images must be NCHW, got shape {tuple(self.images.shape)}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ShapeError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.labels.numel() and (self.labels.min() < 0 or self.labels.max() >= self.classes):
            raise LabelRangeError(f"Labels outside [0, {self.classes})")

    def __len__(self) -> int:
        return self.images.shape[0]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        index = torch.as_tensor(indices, dtype=torch.long)
        return Dataset(self.images[index], self.labels[index], self.classes)

    def head(self, count: int) -> "Dataset":
        return Dataset(self.images[:count], self.labels[:count], self.classes)

    def split(self, fraction: float, seed: int = 0) -> Tuple["Dataset", "Dataset"]:
        """Deterministic (remaining, held_out) split with ``fraction`` held out."""
        order = torch.randperm(len(self), generator=torch.Generator().manual_seed(seed))
        held = int(len(self) * fraction)
        return self.subset(order[held:]), self.subset(order[:held])

    def batches(self, batch_size: int, shuffle: bool = False,
                seed: Optional[int] = None) -> Iterator[Tuple[torch.Tensor, torch.Tensor]]:
        """Yield (images, labels) batches; shuffled order is fixed by ``seed``."""
        if shuffle:
            order = torch.randperm(len(self), generator=torch.Generator().manual_seed(seed or 0))
        else:
            order = torch.arange(len(self))
        for start in range(0, len(self), batch_size):
            index = order[start:start + batch_size]
            yield self.images[index], self.labels[index]

    @staticmethod
    def concat(parts: List["Dataset"]) -> "Dataset":
        return Dataset(torch.cat([p.images for p in parts]), torch.cat([p.labels for p in parts]),
                       parts[0].classes)
