"""Layer sensitivity scores: mean per-sample gradient norm at each layer output."""
import logging
from typing import Callable, Dict, List, Optional

import torch
import torch.nn.functional as F

from graph.forward import forward
from graph.layers import CONV_KINDS
from graph.model import ModelGraph
from utils.errors import PlacementError

logger = logging.getLogger(__name__)

LossFn = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


def summed_cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    # Summed (not averaged) so each sample's slice of the gradient is that
    # sample's own loss gradient.
    return F.cross_entropy(logits, labels, reduction="sum")


def eligible_layers(model: ModelGraph, input_shape) -> List[int]:
    """Convolution layers with 4-D outputs: the analog noise sources."""
    shapes = model.activation_shapes(input_shape)
    return [i for i, layer in enumerate(model.layers)
            if layer.kind in CONV_KINDS and len(shapes[i]) == 4]


def layer_output_grads(model: ModelGraph, images: torch.Tensor, labels: torch.Tensor,
                       layers: List[int], loss_fn: LossFn = summed_cross_entropy
                       ) -> Dict[int, torch.Tensor]:
    """dLoss/dy_l for each requested layer on the clean model."""
    logits, tape = forward(model, images, mode="clean", record=True)
    loss = loss_fn(logits, labels)
    if not loss.requires_grad:
        return {index: torch.zeros_like(tape.outputs[index]) for index in layers}
    grads = torch.autograd.grad(loss, [tape.outputs[index] for index in layers], allow_unused=True)
    return {index: (g if g is not None else torch.zeros_like(tape.outputs[index]))
            for index, g in zip(layers, grads)}


def layer_grad_scores(model: ModelGraph, images: torch.Tensor, labels: torch.Tensor,
                      loss_fn: LossFn = summed_cross_entropy,
                      eligible: Optional[List[int]] = None) -> Dict[int, float]:
    """Score_l = (1/N) sum_n ||dL(x_n)/dy_l||_2 on the clean model.

    Args:
        model: Backbone without denoisers
        images: Calibration batch (N, c, h, w), N >= 1
        labels: Calibration labels
        loss_fn: Loss summed over samples
        eligible: Layers to score; defaults to every convolution layer

    Raises:
        PlacementError: Empty batch or a model that already has denoisers.
    """
    if images.shape[0] == 0:
        raise PlacementError("layer_grad_scores: calibration batch is empty")
    if model.attachments:
        raise PlacementError("layer_grad_scores: score the clean backbone, not a model with denoisers")

    if eligible is None:
        eligible = eligible_layers(model, tuple(images.shape))
    grads = layer_output_grads(model, images, labels, eligible, loss_fn)

    scores = {}
    for index in eligible:
        per_sample = grads[index].detach().flatten(start_dim=1).norm(dim=1)
        scores[index] = per_sample.mean().item()
    logger.info("Layer scores: " + ", ".join(f"{i}={s:.4g}" for i, s in scores.items()))
    return scores
