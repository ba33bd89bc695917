"""Gradient-norm ranking and budgeted placement of denoising blocks."""
from .scoring import eligible_layers, layer_grad_scores, layer_output_grads, summed_cross_entropy
from .selection import PlacementPlan, PlanEntry, select_layers

__all__ = [
    "eligible_layers", "layer_grad_scores", "layer_output_grads", "summed_cross_entropy",
    "PlacementPlan", "PlanEntry", "select_layers",
]
