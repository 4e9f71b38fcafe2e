from __future__ import annotations
from pathlib import Path
from typing import Optional

import numpy as np

from src.components.errors import DatasetFormatError
from src.components.numerics import read_json, read_tensor, write_json, write_tensor
from src.components.tracker.config import ModelConfig
from src.components.tracker.model import Tracker
from src.components.tracker.utils import CHECKPOINT_CONFIG, CHECKPOINT_WEIGHTS


def save_checkpoint(model: Tracker, path: Path, meta: Optional[dict] = None) -> Path:
    """Writes ``model.json`` and one tensor file per named parameter."""
    path = Path(path)
    weights_dir = path / CHECKPOINT_WEIGHTS
    weights_dir.mkdir(parents=True, exist_ok=True)
    for name, array in model.state_dict().items():
        write_tensor(weights_dir / f"{name}.bin", array)
    write_json(path / CHECKPOINT_CONFIG, {"config": model.config.to_dict(), "meta": meta or {}})
    return path


def load_model_config(path: Path) -> ModelConfig:
    config_file = Path(path) / CHECKPOINT_CONFIG
    if not config_file.exists():
        raise DatasetFormatError(config_file, "checkpoint config not found")
    payload = read_json(config_file)
    if "config" not in payload:
        raise DatasetFormatError(config_file, "missing 'config' section")
    return ModelConfig(**payload["config"])


def load_checkpoint(path: Path) -> Tracker:
    path = Path(path)
    model = Tracker(load_model_config(path), np.random.default_rng(0))
    weights_dir = path / CHECKPOINT_WEIGHTS
    model.load_state_dict({name: read_tensor(weights_dir / f"{name}.bin")
                           for name in model.state_dict()})
    return model
