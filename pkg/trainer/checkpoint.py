"""Checkpoint files: model container plus Adam sidecar."""
import logging
from pathlib import Path
from typing import Optional, Tuple

from graph.container import load_model, save_model
from graph.model import ModelGraph
from trainer.optim import AdamState, load_adam_state, save_adam_state

logger = logging.getLogger(__name__)


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".adam" + path.suffix)


def save_checkpoint(model: ModelGraph, path: str, state: Optional[AdamState] = None) -> str:
    """Write ``model`` to ``path`` and the optimizer state next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(save_model(model))
    if state is not None:
        sidecar_path(path).write_bytes(save_adam_state(state))
    logger.info(f"Saved checkpoint {path}")
    return str(path)


def load_checkpoint(path: str, with_state: bool = False) -> Tuple[ModelGraph, Optional[AdamState]]:
    """Read a checkpoint; the Adam sidecar is bound to the trainable parameters."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    model = load_model(path.read_bytes())
    state = None
    if with_state and sidecar_path(path).exists():
        state = load_adam_state(sidecar_path(path).read_bytes(),
                                model.named_parameters(trainable_only=True))
    return model, state
