"""Trainer module: gradients, Adam, training loops and evaluation."""
from graph.forward import ActivationTape
from .autodiff import Gradients, backward, cross_entropy
from .checkpoint import load_checkpoint, save_checkpoint
from .evaluate_model import (evaluate_model, evaluate_over_seeds, noise_accuracy_table, noise_sweep,
                             strip_denoisers, summarize)
from .model_registry import ArtifactRegistry
from .optim import AdamState, adam_step, load_adam_state, save_adam_state
from .train_backbone import train_backbone
from .train_denoisers import train_denoisers

__all__ = [
    "ActivationTape", "Gradients", "backward", "cross_entropy", "load_checkpoint", "save_checkpoint",
    "evaluate_model", "evaluate_over_seeds", "noise_accuracy_table", "noise_sweep", "strip_denoisers",
    "summarize", "ArtifactRegistry",
    "AdamState", "adam_step", "load_adam_state", "save_adam_state", "train_backbone", "train_denoisers",
]
