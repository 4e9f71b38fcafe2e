from __future__ import annotations
from pathlib import Path
from typing import Iterable, Sequence

import pandas as pd

from src.components.errors import ConfigError
from src.components.tracker.cost import COST_VARIANTS, cost_sweep
from src.components.training import read_metrics
from src.components.training.utils import LOSS_COMPONENTS

COST_COLUMNS = ["n_tracks", "variant", "predicted_mac", "measured_mac"]
TRAINING_COLUMNS = ["step", *LOSS_COMPONENTS, "lr", "val_epe"]
PLOT_KINDS = ("cost", "training")

# Tracks per window from 64 to 4096, doubling.
DEFAULT_TRACK_COUNTS = tuple(64 * 2 ** i for i in range(7))


def cost_series(T: int, K: int, M: int, track_counts: Iterable[int] = DEFAULT_TRACK_COUNTS,
                patch_size: int = 4, variants: Sequence[str] = COST_VARIANTS) -> pd.DataFrame:
    """Predicted and counted spatial attention cost against the number of tracks."""
    rows = cost_sweep(T, K, M, track_counts, patch_size, variants)
    return pd.DataFrame(rows, columns=COST_COLUMNS)


def training_series(metrics_path: Path) -> pd.DataFrame:
    path = Path(metrics_path)
    if not path.exists():
        raise ConfigError(f"metrics log not found: {path}")
    return pd.DataFrame(read_metrics(path), columns=TRAINING_COLUMNS)


def write_series(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def emit_plot_data(kind: str, out_path: Path, **inputs) -> Path:
    """Writes the CSV series ``kind`` built from ``inputs`` to ``out_path``."""
    if kind == "cost":
        frame = cost_series(**inputs)
    elif kind == "training":
        frame = training_series(**inputs)
    else:
        raise ConfigError(f"unknown plot-data kind '{kind}' (choose from {list(PLOT_KINDS)})")
    return write_series(frame, out_path)
