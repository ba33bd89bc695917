"""Dense tensors, the layer zoo and ModelGraph.

The forward pass lives in ``graph.forward`` and the container format in
``graph.container``; both depend on ``denoiser`` and are imported directly.
"""
from .layers import LEAKY_SLOPE, LayerDesc, LayerKind, apply_layer, conv2d, leaky_relu, make_layer
from .model import ModelGraph, small_cnn

__all__ = [
    "LEAKY_SLOPE", "LayerDesc", "LayerKind", "apply_layer", "conv2d", "leaky_relu", "make_layer",
    "ModelGraph", "small_cnn",
]
