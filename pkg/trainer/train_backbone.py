"""Clean training of the reference backbone."""
import logging
from typing import Dict, List, Tuple

from dataset.base import Dataset
from graph.forward import forward
from graph.model import ModelGraph
from noise.rng import derive_seed
from trainer.autodiff import backward, cross_entropy
from trainer.optim import AdamState, adam_step

logger = logging.getLogger(__name__)


def run_epoch(model: ModelGraph, dataset: Dataset, state: AdamState, batch_size: int,
              order_seed: int, mode: str = "clean", rng=None) -> Dict[str, float]:
    """One pass over ``dataset`` updating every trainable parameter."""
    params = model.named_parameters(trainable_only=True)
    total_loss = 0.0
    correct = 0
    for images, labels in dataset.batches(batch_size, shuffle=True, seed=order_seed):
        logits, tape = forward(model, images, mode=mode, rng=rng, record=True)
        loss, loss_grad = cross_entropy(logits, labels)
        grads = backward(tape, model, loss_grad)
        adam_step(params, grads, state)

        total_loss += loss.item() * labels.shape[0]
        correct += (logits.detach().argmax(dim=1) == labels).sum().item()
    return {"loss": total_loss / len(dataset), "train_acc": correct / len(dataset)}


def train_backbone(model: ModelGraph, dataset: Dataset, epochs: int = 10, seed: int = 0,
                   batch_size: int = 128, lr: float = 1e-3
                   ) -> Tuple[ModelGraph, AdamState, List[Dict[str, float]]]:
    """Train every layer of a copy of ``model`` on clean activations.

    Args:
        model: Untrained backbone
        dataset: Training split
        epochs: Number of passes
        seed: Fixes the data order of every epoch
        batch_size: Samples per Adam step
        lr: Adam learning rate

    Returns:
        Trained model, optimizer state and per-epoch metrics.
    """
    trained = model.copy()
    for layer in trained.layers:
        layer.set_trainable(True)
    state = AdamState(lr=lr).bind(trained.named_parameters(trainable_only=True))

    logger.info(f"Training backbone {trained.name}: {epochs} epochs, {len(dataset)} samples")
    history = []
    for epoch in range(epochs):
        metrics = run_epoch(trained, dataset, state, batch_size, derive_seed(seed, epoch))
        metrics["epoch"] = epoch + 1
        history.append(metrics)
        logger.info(f"Epoch {epoch + 1}/{epochs}: loss={metrics['loss']:.4f} "
                    f"train_acc={metrics['train_acc']:.3f}")
    return trained, state, history
