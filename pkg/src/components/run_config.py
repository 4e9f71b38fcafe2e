from __future__ import annotations
import copy
import json
import os
from dataclasses import dataclass as std_dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.components.errors import ConfigError
from src.components.metrics import MetricsConfig
from src.components.numerics import read_json, write_json
from src.components.synthdata import SceneConfig
from src.components.tracker import ModelConfig
from src.components.training import TrainConfig

RUN_CONFIG_FILE = "run_config.json"
DEFAULT_OUTPUT_DIR = "output"
DEFAULT_LOG_DIR = "logs"
ENV_OUTPUT_DIR = "TRACK3D_OUTPUT_DIR"
ENV_LOG_DIR = "TRACK3D_LOG_DIR"

# Held-out splits draw seeds from disjoint ranges.
SPLIT_SEED_OFFSETS = {"train": 0, "val": 100_000, "test": 200_000}


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

PRESETS: dict[str, dict] = {
    "desk": {
        "scene": {"T": 12, "H": 64, "W": 64, "n_sprites": 3},
        "model": {},
        "train": {"steps": 2000, "lr": 3e-4, "schedule": "warmup_constant", "patch": [8, 10]},
        "data": {"n_train": 64, "n_val": 8, "n_test": 8, "anchors": ["first"]},
        "ablation": {"seeds": [0, 1, 2], "steps": 2000, "eval_sequences": 8},
    },
    "paper": {
        "scene": {"T": 24, "H": 384, "W": 512, "n_sprites": 8, "sprite_size_range": [32, 160],
                  "depth_noise_std": 0.02},
        "model": {
            "encoder": {"n_residual_blocks": 6, "feature_dim": 256},
            "tracker": {"hidden_dim": 384, "n_heads": 8, "n_blocks": 6, "n_iterations": 6,
                        "window": 16, "n_virtual": 64, "anchor_grid": [9, 12], "patch_size": 6},
        },
        "train": {"steps": 100_000, "lr": 1e-4, "schedule": "one_cycle", "warmup_steps": 1000,
                  "patch": [30, 40], "checkpoint_every": 5000, "val_every": 5000},
        "data": {"n_train": 5000, "n_val": 50, "n_test": 50, "anchors": ["first", "middle", "last"]},
        "ablation": {"seeds": [0, 1, 2], "steps": 20_000, "eval_sequences": 50},
    },
}


class DataSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_train: int = Field(default=64, ge=0)
    n_val: int = Field(default=8, ge=0)
    n_test: int = Field(default=8, ge=0)
    anchors: list[str] = Field(default_factory=lambda: ["first"])

    def seeds(self, split: str, base_seed: int) -> list[int]:
        count = {"train": self.n_train, "val": self.n_val, "test": self.n_test}[split]
        start = base_seed + SPLIT_SEED_OFFSETS[split]
        return list(range(start, start + count))


class AblationSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    factors: list[str] = Field(default_factory=lambda: ["depth_repr", "attention", "upsampler",
                                                        "anchors"])
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2])
    steps: int = Field(default=2000, ge=0)
    eval_sequences: int = Field(default=8, ge=1)


class RunConfig(BaseModel):
    """Fully resolved parameters of one CLI run."""
    model_config = ConfigDict(extra="forbid")

    preset: str = "desk"
    seed: int = 0
    threads: int = Field(default=1, ge=1)
    scene: SceneConfig = Field(default_factory=SceneConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    data: DataSection = Field(default_factory=DataSection)
    ablation: AblationSection = Field(default_factory=AblationSection)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")


# ---------------------------------------------------------------------------
# Merging and overrides
# ---------------------------------------------------------------------------

def deep_merge(base: dict, override: dict) -> dict:
    """Recursive merge; ``override`` wins, nested dicts are merged key by key."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def set_path(config: dict, path: str, value: Any) -> dict:
    """Returns a copy of ``config`` with the dotted ``path`` set to ``value``."""
    keys = path.split(".")
    if not all(keys):
        raise ConfigError(f"invalid config path '{path}'")
    nested: Any = value
    for key in reversed(keys):
        nested = {key: nested}
    return deep_merge(config, nested)


def parse_override(text: str) -> tuple[str, Any]:
    """``key.path=value``; the value is read as JSON when possible, else as a string."""
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form key.path=value")
    path, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path.strip(), value


def resolve_config(preset: str = "desk", config_file: Optional[Path] = None,
                   overrides: Iterable[str] = (), flags: Optional[dict] = None) -> RunConfig:
    """Preset, then config file, then ``--set`` overrides, then dedicated flags."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset '{preset}' (choose from {sorted(PRESETS)})")
    merged = deep_merge(PRESETS[preset], {"preset": preset})
    if config_file is not None:
        payload = read_json(config_file)
        if not isinstance(payload, dict):
            raise ConfigError(f"{config_file}: config file must hold a JSON object")
        merged = deep_merge(merged, payload)
    for text in overrides:
        path, value = parse_override(text)
        merged = set_path(merged, path, value)
    for path, value in (flags or {}).items():
        if value is not None:
            merged = set_path(merged, path, value)
    try:
        return RunConfig(**merged)
    except ValidationError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e


def write_resolved(config: RunConfig, out_dir: Path) -> Path:
    return write_json(Path(out_dir) / RUN_CONFIG_FILE, config.to_dict())


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

@std_dataclass
class Environment:
    output_dir: Path
    log_dir: Path


def load_environment(env_file: Optional[Path] = None) -> Environment:
    """Reads ``.env`` (without overriding set variables) and the directory defaults."""
    load_dotenv(dotenv_path=env_file, override=False)
    return Environment(output_dir=Path(os.getenv(ENV_OUTPUT_DIR, DEFAULT_OUTPUT_DIR)),
                       log_dir=Path(os.getenv(ENV_LOG_DIR, DEFAULT_LOG_DIR)))
