"""ModelGraph container and the SmallCNN reference backbone."""
import copy
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import torch

from graph.layers import CONV_KINDS, MVM_KINDS, LayerDesc, LayerKind, make_layer

if TYPE_CHECKING:
    from denoiser.block import DenoiserParams
    from noise.injection import NoiseSpec

logger = logging.getLogger(__name__)


@dataclass
class ModelGraph:
    """Ordered layer list plus denoiser attachments.

    ``attachments`` maps a layer index to the denoising block that consumes
    that layer's (noisy) output.
    """

    layers: List[LayerDesc]
    attachments: Dict[int, "DenoiserParams"] = field(default_factory=dict)
    name: str = "model"
    classes: int = 10
    noise_spec: Optional["NoiseSpec"] = None

    def named_parameters(self, trainable_only: bool = False) -> Dict[str, torch.Tensor]:
        """Parameter tensors keyed by container name.

        Backbone tensors are ``layers.<i>.<weight|bias>``; denoiser tensors are
        ``denoiser.<i>.<conv>.<weight|bias>``.
        """
        named = {}
        for index, layer in enumerate(self.layers):
            if trainable_only and not layer.trainable:
                continue
            for key, tensor in layer.params().items():
                named[f"layers.{index}.{key}"] = tensor
        for index in sorted(self.attachments):
            for key, tensor in self.attachments[index].named_parameters().items():
                named[f"denoiser.{index}.{key}"] = tensor
        return named

    def parameter_count(self, trainable_only: bool = False) -> int:
        return sum(t.numel() for t in self.named_parameters(trainable_only).values())

    def backbone_parameter_count(self) -> int:
        return sum(t.numel() for layer in self.layers for t in layer.params().values())

    def backbone_tensors(self) -> Dict[str, torch.Tensor]:
        return {name: t for name, t in self.named_parameters().items() if name.startswith("layers.")}

    def input_channels(self) -> int:
        return self.layers[0].in_channels

    def activation_shapes(self, input_shape: Sequence[int]) -> List[Tuple[int, ...]]:
        """Output shape of every layer for a given input shape."""
        shapes = []
        shape = tuple(input_shape)
        for layer in self.layers:
            shape = layer.output_shape(shape)
            shapes.append(shape)
        return shapes

    def mvm_indices(self) -> List[int]:
        """Indices of layers executed as analog matrix-vector products."""
        return [i for i, layer in enumerate(self.layers) if layer.kind in MVM_KINDS]

    def conv_indices(self) -> List[int]:
        return [i for i, layer in enumerate(self.layers) if layer.kind in CONV_KINDS]

    def signature(self) -> Tuple:
        """Structural fingerprint used to match activation tapes to models."""
        layer_part = tuple(
            (layer.kind.value, layer.in_channels, layer.out_channels, layer.kernel, layer.stride)
            for layer in self.layers
        )
        return layer_part, tuple(sorted(self.attachments))

    def freeze_backbone(self) -> None:
        for layer in self.layers:
            layer.set_trainable(False)

    def copy(self) -> "ModelGraph":
        """Deep copy with independent parameter tensors."""
        clone = copy.deepcopy(self)
        for layer in clone.layers:
            layer.set_trainable(layer.trainable)
        return clone

    def to(self, dtype: torch.dtype) -> "ModelGraph":
        """Copy with every parameter cast to ``dtype``."""
        clone = self.copy()
        for layer in clone.layers:
            if layer.weight is not None:
                layer.weight = layer.weight.detach().to(dtype)
            if layer.bias is not None:
                layer.bias = layer.bias.detach().to(dtype)
            layer.set_trainable(layer.trainable)
        for params in clone.attachments.values():
            params.cast(dtype)
        return clone


def small_cnn(classes: int = 10, seed: int = 0, in_channels: int = 3) -> ModelGraph:
    """Reference backbone for desk-scale experiments.

    conv3x3(3->32) / conv3x3(32->32, s2) / conv3x3(32->64, s2), each followed
    by leaky ReLU, then global average pooling and linear(64->classes).
    """
    generator = torch.Generator().manual_seed(seed)
    layers = [
        make_layer(LayerKind.CONV2D, in_channels, 32, kernel=3, stride=1, padding=1,
                   generator=generator, name="conv0"),
        make_layer(LayerKind.LEAKY_RELU, 32, name="act0"),
        make_layer(LayerKind.CONV2D, 32, 32, kernel=3, stride=2, padding=1,
                   generator=generator, name="conv1"),
        make_layer(LayerKind.LEAKY_RELU, 32, name="act1"),
        make_layer(LayerKind.CONV2D, 32, 64, kernel=3, stride=2, padding=1,
                   generator=generator, name="conv2"),
        make_layer(LayerKind.LEAKY_RELU, 64, name="act2"),
        make_layer(LayerKind.GLOBAL_AVG_POOL, 64, name="pool"),
        make_layer(LayerKind.LINEAR, 64, classes, generator=generator, name="fc"),
    ]
    logger.debug(f"Built SmallCNN with seed {seed}")
    return ModelGraph(layers=layers, name="SmallCNN", classes=classes)
