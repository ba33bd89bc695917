"""Render result tables from CSV files written by the other commands.

Nothing here computes a metric: values are read as strings and printed as-is.
"""
import logging
from pathlib import Path
from typing import List

import pandas as pd

logger = logging.getLogger(__name__)

ACCURACY_HEADERS = {
    "model": "Model",
    "baseline": "Baseline",
    "noisy": "Noisy",
    "denoised": "Denoised",
    "overhead_pct": "Parameter Count Overhead (%)",
}

SWEEP_HEADERS = {
    "sigma_pct": "Gaussian Noise σ (%)",
    "clean_acc": "Clean",
    "noisy_mean": "Noisy",
    "noisy_std": "Noisy std",
    "denoised_mean": "Denoised",
    "denoised_std": "Denoised std",
}

CYCLE_HEADERS = {
    "layer": "Layer",
    "baseline_cycles": "Baseline cycles",
    "denoiser_cycles": "Denoiser cycles",
    "total_cycles": "Total cycles",
}

SECTIONS = [
    ("summary.csv", "Accuracy and parameter overhead", ACCURACY_HEADERS),
    ("sweep.csv", "Accuracy versus noise level", SWEEP_HEADERS),
    ("layer_cycles.csv", "Per-layer cycle counts", CYCLE_HEADERS),
]


def read_table(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#", dtype=str, keep_default_na=False)


def render_table(frame: pd.DataFrame, headers: dict) -> str:
    missing = [column for column in headers if column not in frame.columns]
    if missing:
        raise ValueError(f"table is missing columns: {', '.join(missing)}")
    renamed = frame[list(headers)].rename(columns=headers)
    return renamed.to_string(index=False)


def render_report(directory: str) -> str:
    """Text report of every result file present in ``directory``.

    Raises:
        FileNotFoundError: None of the result files exist.
    """
    root = Path(directory)
    blocks: List[str] = []
    for filename, title, headers in SECTIONS:
        path = root / filename
        if not path.exists():
            logger.info(f"Report: {path} not found, section skipped")
            continue
        try:
            body = render_table(read_table(path), headers)
        except ValueError as e:
            raise ValueError(f"{path}: {e}") from e
        blocks.append(f"{title}\n{'=' * len(title)}\n{body}\n")

    if not blocks:
        expected = ", ".join(name for name, _, _ in SECTIONS)
        raise FileNotFoundError(f"No result files in {root} (expected any of: {expected})")
    return "\n".join(blocks)
