"""Adam optimizer state and update step."""
from dataclasses import dataclass, field
from typing import Dict

import torch

from graph.container import read_container, write_container
from utils.errors import ShapeError

Params = Dict[str, torch.Tensor]


@dataclass
class AdamState:
    """Adam hyperparameters plus per-parameter moments (held by torch.optim.Adam)."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    _optimizer: torch.optim.Adam = field(default=None, repr=False)
    _names: Dict[int, str] = field(default_factory=dict, repr=False)

    def bind(self, params: Params) -> "AdamState":
        """Attach the optimizer to ``params`` (a name -> leaf tensor mapping)."""
        self._names = {id(t): name for name, t in params.items()}
        self._optimizer = torch.optim.Adam(list(params.values()), lr=self.lr,
                                           betas=(self.beta1, self.beta2), eps=self.eps,
                                           foreach=False)
        return self

    def moments(self) -> Dict[str, Dict[str, torch.Tensor]]:
        """First/second moments per parameter name (only for updated parameters)."""
        out = {}
        for tensor, slot in self._optimizer.state.items():
            out[self._names[id(tensor)]] = {"exp_avg": slot["exp_avg"], "exp_avg_sq": slot["exp_avg_sq"]}
        return out


def adam_step(params: Params, grads: Params, state: AdamState) -> Params:
    """Apply one bias-corrected Adam update to ``params`` in place.

    Parameters without a gradient entry are left untouched.
    """
    if state._optimizer is None:
        state.bind(params)
    for name, grad in grads.items():
        if name not in params:
            raise ShapeError(f"Gradient for unknown parameter '{name}'")
        if tuple(grad.shape) != tuple(params[name].shape):
            raise ShapeError(
                f"Gradient shape {tuple(grad.shape)} != parameter shape {tuple(params[name].shape)} for '{name}'"
            )
    for name, tensor in params.items():
        tensor.grad = grads[name].detach().clone() if name in grads else None

    state._optimizer.step()
    state.step += 1
    for tensor in params.values():
        tensor.grad = None
    return params


def save_adam_state(state: AdamState) -> bytes:
    """Serialize optimizer state as a sidecar container."""
    tensors = {}
    for name, slot in state.moments().items():
        tensors[f"exp_avg.{name}"] = slot["exp_avg"]
        tensors[f"exp_avg_sq.{name}"] = slot["exp_avg_sq"]
    manifest = {"format": "adam", "lr": state.lr, "beta1": state.beta1, "beta2": state.beta2,
                "eps": state.eps, "step": state.step}
    return write_container(manifest, tensors)


def load_adam_state(data: bytes, params: Params) -> AdamState:
    """Rebuild an AdamState bound to ``params`` from sidecar bytes."""
    manifest, tensors = read_container(data)
    state = AdamState(lr=manifest["lr"], beta1=manifest["beta1"], beta2=manifest["beta2"],
                      eps=manifest["eps"], step=manifest["step"]).bind(params)
    for name, tensor in params.items():
        if f"exp_avg.{name}" in tensors:
            state._optimizer.state[tensor] = {
                "step": torch.tensor(float(state.step)),
                "exp_avg": tensors[f"exp_avg.{name}"],
                "exp_avg_sq": tensors[f"exp_avg_sq.{name}"],
            }
    return state
