"""Configuration loader with YAML, JSON and environment variable support."""
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import pandas as pd
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from hw.config import HwConfig
from utils.errors import ConfigError

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "config" / "config.yaml"

# Environment variable -> dotted config key
ENV_OVERRIDES = {
    "ANMD_OUTPUT_DIR": "output_dir",
    "ANMD_SEED": "seed",
    "ANMD_DATASET_KIND": "dataset.kind",
    "ANMD_CIFAR_DIR": "dataset.cifar_dir",
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetConfig(_Strict):
    kind: Literal["synthetic", "cifar10"] = "synthetic"
    cifar_dir: Optional[str] = None
    synthetic_train: int = Field(4096, ge=1)
    synthetic_test: int = Field(1024, ge=1)
    classes: int = Field(10, ge=2)
    image_size: int = Field(32, ge=4)
    validation_split: float = Field(0.1, ge=0.0, lt=1.0)


class BackboneConfig(_Strict):
    kind: Literal["small_cnn", "shape_table"] = "small_cnn"
    shape_table: Optional[str] = None
    classes: int = Field(10, ge=2)


class NoiseConfig(_Strict):
    sigma_pct: float = Field(6.0, ge=0.0, allow_inf_nan=False)
    mean: float = Field(0.0, allow_inf_nan=False)
    layers: Optional[List[int]] = None
    sigma_mode: Literal["relative", "constant"] = "relative"


class PlacementConfig(_Strict):
    eta_pct: float = Field(4.0, ge=0.0)
    calib_samples: int = Field(256, ge=1)
    mode: Literal["skip", "stop"] = "skip"
    ratio: float = Field(0.25, gt=0.0, le=1.0)


class TrainingConfig(_Strict):
    backbone_epochs: int = Field(10, ge=0)
    denoiser_epochs: int = Field(5, ge=0)
    batch_size: int = Field(128, ge=1)
    lr: float = Field(1e-3, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)


class EvaluationConfig(_Strict):
    seeds: int = Field(5, ge=1)
    sweep_sigmas: List[float] = Field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0])


class ExperimentConfig(_Strict):
    """Validated experiment configuration."""

    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    placement: PlacementConfig = Field(default_factory=PlacementConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    hw: HwConfig = Field(default_factory=HwConfig)
    seed: int = Field(0, ge=0)
    output_dir: str = "./outputs"


def _read_document(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    with open(path, 'r') as f:
        if path.suffix == ".json":
            data = json.load(f)
        else:
            data = yaml.safe_load(f)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a mapping at top level")
    return data


def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _set_dotted(config: Dict[str, Any], dotted_key: str, value: Any) -> None:
    node = config
    *parents, leaf = dotted_key.split(".")
    for part in parents:
        node = node.setdefault(part, {})
    node[leaf] = value


def _format_validation_error(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        key = ".".join(str(part) for part in item["loc"])
        if item["type"] == "extra_forbidden":
            problems.append(f"unknown key '{key}'")
        else:
            problems.append(f"'{key}': {item['msg']}")
    return "Invalid configuration: " + "; ".join(problems)


def load_config(path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Load configuration from YAML/JSON, environment variables and overrides.

    Args:
        path: Optional user config file merged over the defaults
        overrides: Dotted keys (e.g. ``"noise.sigma_pct"``) set last

    Returns:
        Validated ExperimentConfig.

    Raises:
        ConfigError: Unknown keys, bad values or unreadable files.
    """
    load_dotenv()

    config = _read_document(DEFAULT_CONFIG_PATH)
    if path:
        config = _deep_merge(config, _read_document(Path(path)))

    for env_name, dotted_key in ENV_OVERRIDES.items():
        if os.getenv(env_name):
            _set_dotted(config, dotted_key, os.getenv(env_name))

    for dotted_key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(config, dotted_key, value)

    try:
        return ExperimentConfig.model_validate(config)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e


def load_shape_table(path: str) -> pd.DataFrame:
    """Load a layer-shape table used for cycle accounting.

    Args:
        path: CSV with columns layer, kind, c_in, c_out, h_out, w_out, kernel

    Returns:
        DataFrame with one row per layer, in execution order.
    """
    required = ["layer", "kind", "c_in", "c_out", "h_out", "w_out", "kernel"]
    table_path = Path(path)
    if not table_path.is_absolute() and not table_path.exists():
        table_path = DEFAULT_CONFIG_PATH.parent.parent / path
    if not table_path.exists():
        raise ConfigError(f"Shape table not found: {path}")

    table = pd.read_csv(table_path, comment="#")
    missing = [column for column in required if column not in table.columns]
    if missing:
        raise ConfigError(f"Shape table {path} is missing columns: {', '.join(missing)}")
    return table[required].reset_index(drop=True)
