"""Registry of experiment artifacts kept next to the outputs."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class ArtifactRegistry:
    """Tracks the latest artifact of each kind (backbone, plan, denoised, eval, hw).

    Entries carry no timestamps, so re-running a command with the same inputs
    leaves ``registry.json`` byte-identical.
    """

    def __init__(self, output_dir: str):
        """Initialize artifact registry.

        Args:
            output_dir: Experiment output directory
        """
        self.output_dir = Path(output_dir)
        self.registry_path = self.output_dir / "registry.json"
        self.output_dir.mkdir(parents=True, exist_ok=True)

        if not self.registry_path.exists():
            self._write({})

        logger.debug(f"Artifact registry at {self.registry_path}")

    def _read(self) -> Dict[str, Dict[str, Any]]:
        with open(self.registry_path, 'r') as f:
            return json.load(f)

    def _write(self, registry: Dict[str, Dict[str, Any]]) -> None:
        with open(self.registry_path, 'w') as f:
            json.dump(registry, f, indent=2, sort_keys=True)

    def register(self, kind: str, path: str, seed: int, metrics: Optional[Dict[str, Any]] = None) -> None:
        """Record (or replace) the artifact of ``kind``.

        Args:
            kind: Artifact kind, e.g. "backbone"
            path: File path of the artifact
            seed: Master seed that produced it
            metrics: Headline metrics
        """
        registry = self._read()
        registry[kind] = {"path": str(path), "seed": seed, **(metrics or {})}
        self._write(registry)
        logger.info(f"Registered {kind}: {path}")

    def get(self, kind: str) -> Optional[Dict[str, Any]]:
        return self._read().get(kind)

    def list_artifacts(self) -> List[str]:
        return sorted(self._read())
