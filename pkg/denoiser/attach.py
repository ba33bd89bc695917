"""Insert denoising blocks into a ModelGraph."""
import logging
from typing import Iterable, Union

import torch

from denoiser.block import DEFAULT_RATIO, denoiser_init
from graph.model import ModelGraph
from utils.errors import PlacementError

logger = logging.getLogger(__name__)


def _plan_indices(plan) -> list:
    if hasattr(plan, "entries"):
        return [entry.layer_index for entry in plan.entries]
    return [int(index) for index in plan]


def attach(model: ModelGraph, plan: Union["PlacementPlan", Iterable[int]],
           ratio: float = DEFAULT_RATIO, seed: int = 0, input_hw=(32, 32),
           freeze_backbone: bool = True) -> ModelGraph:
    """Return model* with a fresh denoising block after each planned layer.

    Args:
        model: Backbone (optionally with noise flags)
        plan: PlacementPlan or iterable of layer indices
        ratio: Bottleneck ratio of the new blocks
        seed: Base seed; block for layer i uses seed + i
        input_hw: Spatial input size used to check activations are 4-D
        freeze_backbone: Mark every backbone layer non-trainable

    Raises:
        PlacementError: Duplicate index, out-of-range index or non-4D activation.
    """
    indices = _plan_indices(plan)
    if len(set(indices)) != len(indices):
        raise PlacementError(f"Duplicate layer index in plan: {indices}")

    dtype = next(iter(model.backbone_tensors().values()), torch.zeros(0)).dtype
    shapes = model.activation_shapes((1, model.input_channels()) + tuple(input_hw))
    starred = model.copy()
    if freeze_backbone:
        starred.freeze_backbone()

    for index in indices:
        if not 0 <= index < len(model.layers):
            raise PlacementError(f"Plan index {index} out of range for {len(model.layers)} layers")
        if index in starred.attachments:
            raise PlacementError(f"Layer {index} already has a denoiser")
        if len(shapes[index]) != 4:
            raise PlacementError(
                f"Layer {index} produces a {len(shapes[index])}-D activation; denoisers need 4-D"
            )
        block = denoiser_init(shapes[index][1], ratio, seed + index)
        if dtype != torch.float32:
            block.cast(dtype)
        starred.attachments[index] = block

    if indices:
        logger.info(f"Attached {len(indices)} denoisers at layers {indices} "
                    f"(+{denoiser_overhead_pct(starred):.2f}% parameters)")
    return starred


def denoiser_overhead_pct(model: ModelGraph) -> float:
    """Denoiser parameters as a percentage of backbone parameters."""
    added = sum(params.parameter_count() for params in model.attachments.values())
    return 100.0 * added / model.backbone_parameter_count()
