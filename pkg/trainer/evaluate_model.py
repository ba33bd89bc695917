"""Model evaluation utilities."""
import logging
from typing import Dict, Iterable, List, Optional

import pandas as pd
import torch

from dataset.base import Dataset
from graph.forward import forward
from graph.model import ModelGraph
from noise.injection import NoiseSpec, apply_noise_spec
from noise.rng import RngState
from trainer.autodiff import cross_entropy

logger = logging.getLogger(__name__)


def evaluate_model(model: ModelGraph, dataset: Dataset, mode: str = "clean",
                   rng: Optional[RngState] = None, batch_size: int = 256) -> Dict[str, float]:
    """Accuracy and mean cross-entropy of ``model`` on ``dataset``.

    Args:
        model: Model (with or without noise flags / denoisers)
        dataset: Evaluation split
        mode: "clean" or "noisy"
        rng: Noise/eps source; one forward call per batch

    Returns:
        Dictionary with accuracy (0-1) and loss
    """
    rng = rng or RngState(seed=0)
    correct = 0
    total_loss = 0.0
    for images, labels in dataset.batches(batch_size):
        logits, _ = forward(model, images, mode=mode, rng=rng)
        loss, _ = cross_entropy(logits, labels)
        total_loss += loss.item() * labels.shape[0]
        correct += (logits.argmax(dim=1) == labels).sum().item()

    metrics = {"accuracy": correct / len(dataset), "loss": total_loss / len(dataset)}
    logger.debug(f"Evaluated {model.name} ({mode}): accuracy={metrics['accuracy']:.4f}")
    return metrics


def evaluate_over_seeds(model: ModelGraph, dataset: Dataset, mode: str, seeds: Iterable[int],
                        batch_size: int = 256) -> pd.DataFrame:
    """One row per seed with accuracy and loss."""
    rows = []
    for seed in seeds:
        metrics = evaluate_model(model, dataset, mode, RngState(seed=seed), batch_size)
        rows.append({"seed": seed, **metrics})
    return pd.DataFrame(rows, columns=["seed", "accuracy", "loss"])


def summarize(frame: pd.DataFrame, column: str = "accuracy") -> Dict[str, float]:
    """Mean and (population) std of one column over seeds."""
    values = torch.tensor(frame[column].to_numpy(), dtype=torch.float64)
    return {"mean": values.mean().item(), "std": values.std(unbiased=False).item()}


def noise_accuracy_table(model: ModelGraph, dataset: Dataset, sigma_pct: float,
                         seeds: List[int], noise_layers: Optional[List[int]] = None,
                         batch_size: int = 256) -> pd.DataFrame:
    """Clean accuracy plus noisy accuracy at ``sigma_pct`` for each seed.

    Rows are per seed followed by mean and std aggregate rows.
    """
    clean = evaluate_model(model, dataset, "clean", RngState(seed=0), batch_size)["accuracy"]
    layers = noise_layers if noise_layers is not None else model.conv_indices()
    noisy_model = apply_noise_spec(model, NoiseSpec.for_layers(layers, sigma_pct))
    per_seed = evaluate_over_seeds(noisy_model, dataset, "noisy", seeds, batch_size)

    rows = [{"row": f"seed={seed}", "sigma_pct": sigma_pct, "clean_acc": clean, "noisy_acc": acc}
            for seed, acc in zip(per_seed["seed"], per_seed["accuracy"])]
    stats = summarize(per_seed)
    rows.append({"row": "mean", "sigma_pct": sigma_pct, "clean_acc": clean, "noisy_acc": stats["mean"]})
    rows.append({"row": "std", "sigma_pct": sigma_pct, "clean_acc": 0.0, "noisy_acc": stats["std"]})
    return pd.DataFrame(rows, columns=["row", "sigma_pct", "clean_acc", "noisy_acc"])


def strip_denoisers(model: ModelGraph) -> ModelGraph:
    """The backbone of model* with its attachments removed."""
    backbone = model.copy()
    backbone.attachments = {}
    return backbone


def noise_sweep(model: ModelGraph, dataset: Dataset, sigmas: List[float], seeds: List[int],
                noise_layers: Optional[List[int]] = None, batch_size: int = 256) -> pd.DataFrame:
    """Accuracy under increasing noise, one row per sigma.

    ``noisy_*`` columns evaluate the bare backbone; when ``model`` carries
    denoisers the ``denoised_*`` columns evaluate model* under the same noise
    seeds, otherwise they are NaN.
    """
    backbone = strip_denoisers(model)
    layers = noise_layers if noise_layers is not None else model.conv_indices()
    clean = evaluate_model(backbone, dataset, "clean", RngState(seed=0), batch_size)["accuracy"]

    rows = []
    for sigma in sigmas:
        spec = NoiseSpec.for_layers(layers, sigma)
        noisy = summarize(evaluate_over_seeds(apply_noise_spec(backbone, spec), dataset, "noisy",
                                              seeds, batch_size))
        row = {"sigma_pct": sigma, "clean_acc": clean,
               "noisy_mean": noisy["mean"], "noisy_std": noisy["std"],
               "denoised_mean": float("nan"), "denoised_std": float("nan")}
        if model.attachments:
            denoised = summarize(evaluate_over_seeds(apply_noise_spec(model, spec), dataset, "noisy",
                                                     seeds, batch_size))
            row["denoised_mean"], row["denoised_std"] = denoised["mean"], denoised["std"]
        rows.append(row)
        logger.info(f"sigma={sigma:g}%: noisy={row['noisy_mean']:.4f} denoised={row['denoised_mean']:.4f}")
    return pd.DataFrame(rows, columns=["sigma_pct", "clean_acc", "noisy_mean", "noisy_std",
                                       "denoised_mean", "denoised_std"])
