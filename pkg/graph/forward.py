"""Clean and noisy forward passes with an activation tape for backward."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Tuple

import torch

from denoiser.block import denoiser_forward
from graph.layers import apply_layer
from graph.model import ModelGraph
from noise.injection import sample_noise
from noise.rng import RngState, StreamTag
from utils.errors import ShapeError

logger = logging.getLogger(__name__)

Mode = Literal["clean", "noisy"]


@dataclass
class ActivationTape:
    """Everything one forward pass needs to be differentiated or replayed.

    ``outputs`` holds each layer's output before noise; ``noise`` holds the
    injected z per noise point and ``eps`` the standard-normal draw per
    denoiser attachment.
    """

    signature: Tuple
    outputs: Dict[int, torch.Tensor] = field(default_factory=dict)
    noise: Dict[int, torch.Tensor] = field(default_factory=dict)
    eps: Dict[int, torch.Tensor] = field(default_factory=dict)
    logits: Optional[torch.Tensor] = None
    recorded: bool = False

    @classmethod
    def for_replay(cls, model: ModelGraph, noise: Optional[Dict[int, torch.Tensor]] = None,
                   eps: Optional[Dict[int, torch.Tensor]] = None) -> "ActivationTape":
        """Tape carrying fixed noise/eps tensors to feed into ``forward(replay=...)``."""
        return cls(signature=model.signature(), noise=dict(noise or {}), eps=dict(eps or {}))


def forward(model: ModelGraph, x: torch.Tensor, mode: Mode = "clean",
            rng: Optional[RngState] = None, record: bool = False,
            replay: Optional[ActivationTape] = None) -> Tuple[torch.Tensor, ActivationTape]:
    """Run ``model`` on ``x``.

    In noisy mode noise is added after every noise-enabled layer, before any
    denoiser attached to that layer. Denoisers themselves are noise-free.

    Args:
        model: Backbone, optionally with noise flags and attachments
        x: Input batch (n, c, h, w)
        mode: "clean" or "noisy"
        rng: Source of hardware noise and denoiser eps; each call consumes one
            call index. Defaults to the noise spec seed.
        record: Keep the autograd graph and per-layer outputs for backward
        replay: Reuse the noise and eps tensors of an earlier tape

    Returns:
        (logits, tape)
    """
    if mode not in ("clean", "noisy"):
        raise ValueError(f"Unknown forward mode: {mode}")
    if x.dim() != 4 or x.shape[1] != model.input_channels():
        raise ShapeError(
            f"{model.name}: input shape {tuple(x.shape)} does not match "
            f"{model.input_channels()} input channels"
        )

    spec = model.noise_spec
    if rng is None:
        rng = RngState(seed=spec.seed if spec is not None else 0)
    needs_rng = replay is None and (bool(model.attachments) or (mode == "noisy" and spec is not None))
    call = rng.next_call() if needs_rng else 0

    tape = ActivationTape(signature=model.signature(), recorded=record)
    with torch.set_grad_enabled(record):
        h = x
        for index, layer in enumerate(model.layers):
            h = apply_layer(h, layer)
            if record:
                if not h.requires_grad:
                    h.requires_grad_()
                tape.outputs[index] = h

            if mode == "noisy" and layer.noise_enabled:
                z = _noise_for(model, index, h, rng, call, replay)
                if z is not None:
                    h = h + z
                    tape.noise[index] = z

            if index in model.attachments:
                if replay is not None and index in replay.eps:
                    eps = replay.eps[index]
                else:
                    eps = rng.normal(h.shape, call, index, StreamTag.EPSILON, dtype=h.dtype)
                h, _, _ = denoiser_forward(h, model.attachments[index], eps)
                tape.eps[index] = eps

    tape.logits = h
    return h, tape


def _noise_for(model: ModelGraph, index: int, h: torch.Tensor, rng: RngState, call: int,
               replay: Optional[ActivationTape]) -> Optional[torch.Tensor]:
    if replay is not None:
        return replay.noise.get(index)
    spec = model.noise_spec
    entry = spec.entry_for(index) if spec is not None else None
    if entry is None or entry.is_zero:
        return None
    return sample_noise(h.detach(), entry, rng, call, spec.sigma_mode)
