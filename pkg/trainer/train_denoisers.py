"""Denoiser training against a frozen, noisy backbone."""
import logging
from typing import Dict, List, Tuple

from dataset.base import Dataset
from graph.model import ModelGraph
from noise.rng import RngState, derive_seed
from trainer.optim import AdamState
from trainer.train_backbone import run_epoch
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


def train_denoisers(model: ModelGraph, dataset: Dataset, epochs: int = 5, seed: int = 0,
                    batch_size: int = 128, lr: float = 1e-3
                    ) -> Tuple[ModelGraph, AdamState, List[Dict[str, float]]]:
    """Train only the denoising blocks of model*.

    Hardware noise stays active (when the model carries a noise spec) and every
    forward pass draws fresh noise and fresh eps.

    Raises:
        ConfigError: The model has no denoiser attachments.
    """
    if not model.attachments:
        raise ConfigError("train_denoisers: model has no denoiser attachments (empty plan?)")

    starred = model.copy()
    starred.freeze_backbone()
    mode = "noisy" if starred.noise_spec is not None else "clean"
    rng = RngState(seed=seed)
    state = AdamState(lr=lr).bind(starred.named_parameters(trainable_only=True))

    logger.info(f"Training denoisers at layers {sorted(starred.attachments)}: {epochs} epochs, "
                f"{starred.parameter_count(trainable_only=True)} trainable parameters, {mode} backbone")
    history = []
    for epoch in range(epochs):
        metrics = run_epoch(starred, dataset, state, batch_size, derive_seed(seed, epoch),
                            mode=mode, rng=rng)
        metrics["epoch"] = epoch + 1
        history.append(metrics)
        logger.info(f"Epoch {epoch + 1}/{epochs}: loss={metrics['loss']:.4f} "
                    f"train_acc={metrics['train_acc']:.3f}")
    return starred, state, history
