"""Reverse-mode gradients over recorded forward passes."""
from typing import Dict, Tuple

import torch
import torch.nn.functional as F

from graph.forward import ActivationTape
from graph.model import ModelGraph
from utils.errors import LabelRangeError, ShapeError, TapeMismatchError

Gradients = Dict[str, torch.Tensor]


def backward(tape: ActivationTape, model: ModelGraph, loss_grad: torch.Tensor,
             retain_graph: bool = False) -> Gradients:
    """Gradients of the loss for every trainable parameter of ``model``.

    Injected hardware noise enters the graph as a detached constant, and each
    denoiser uses the eps stored on the tape, so dZ/dmu = 1 and dZ/dsigma = eps.

    Args:
        tape: Tape of a ``forward(..., record=True)`` call on ``model``
        model: The model the tape was recorded on
        loss_grad: dLoss/dlogits, shaped like ``tape.logits``

    Returns:
        Mapping parameter name -> gradient. Frozen parameters are absent.

    Raises:
        TapeMismatchError: Tape not recorded, or recorded on another model.
    """
    if not tape.recorded or tape.logits is None:
        raise TapeMismatchError("Tape was not recorded with gradient recording on")
    if tape.signature != model.signature():
        raise TapeMismatchError("Tape was recorded on a different model structure")
    if tuple(loss_grad.shape) != tuple(tape.logits.shape):
        raise ShapeError(
            f"loss_grad shape {tuple(loss_grad.shape)} != logits shape {tuple(tape.logits.shape)}"
        )

    params = model.named_parameters(trainable_only=True)
    if not params:
        return {}
    names = list(params)
    grads = torch.autograd.grad(tape.logits, [params[n] for n in names], grad_outputs=loss_grad,
                                retain_graph=retain_graph, allow_unused=True)
    return {name: (g if g is not None else torch.zeros_like(params[name]))
            for name, g in zip(names, grads)}


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Mean softmax cross-entropy and its gradient (softmax - onehot) / n."""
    if logits.dim() != 2:
        raise ShapeError(f"cross_entropy expects (n, classes) logits, got {tuple(logits.shape)}")
    classes = logits.shape[1]
    if labels.numel() and (labels.min() < 0 or labels.max() >= classes):
        raise LabelRangeError(f"Labels outside [0, {classes})")

    logits = logits.detach()
    loss = F.cross_entropy(logits, labels)
    grad = (torch.softmax(logits, dim=1) - F.one_hot(labels, classes).to(logits.dtype)) / logits.shape[0]
    return loss, grad
