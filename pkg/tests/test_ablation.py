"""
Unit tests for the ablation harness (ablation.py) on a micro budget.

Tests cover:
- Variant configs change exactly one config path
- Rows per variant with deltas relative to the reference variant
- Table CSV columns and logged variant events
- Unknown factors and empty evaluation sets
"""

import numpy as np
import pandas as pd
import pytest

from src.components.ablation import (
    FACTORS, TABLE_COLUMNS, evaluate_model, run_ablation, variant_config,
)
from src.components.errors import ConfigError
from src.components.run_config import resolve_config
from src.components.run_logger import create_run_logger
from src.components.synthdata import SceneConfig, generate_sequence
from src.components.tracker import Tracker
from tests.conftest import micro_config


def _config(**ablation):
    flags = {
        "model": micro_config().to_dict(),
        "train": {"patch": [2, 2], "warmup_steps": 1, "lr": 1e-3, "log_every": 0},
        "ablation": {"seeds": [0], "steps": 1, "eval_sequences": 1, **ablation},
    }
    return resolve_config("desk", flags=flags)


def _sequences(n, seed):
    cfg = SceneConfig(T=3, H=8, W=8, n_sprites=1, sprite_size_range=(2, 4))
    return [generate_sequence(cfg, seed=seed + i) for i in range(n)]


class TestVariantConfig:

    def test_sets_one_path(self):
        base = _config()
        run = variant_config(base, "depth_repr", "inverse")
        assert run.model.tracker.depth_repr == "inverse"
        assert run.model.encoder == base.model.encoder
        assert run.train == base.train

    def test_anchor_factor_touches_training_only(self):
        run = variant_config(_config(), "anchors", False)
        assert run.train.use_anchors is False
        assert run.model.tracker.attention_variant == "ours_global_local"

    def test_unknown_factor(self):
        with pytest.raises(ConfigError, match="unknown ablation factor"):
            variant_config(_config(), "optimizer", "sgd")


class TestRunAblation:

    def test_rows_and_deltas(self, tmp_path):
        logger = create_run_logger(None, "abl")
        table = run_ablation(_config(), _sequences(2, 0), _sequences(2, 50),
                             factors=["anchors", "depth_repr"], logger=logger, progress=False)
        assert [(r.factor, r.variant) for r in table.rows] == [
            ("anchors", "True"), ("anchors", "False"),
            ("depth_repr", "log"), ("depth_repr", "linear"), ("depth_repr", "inverse")]
        reference = table.row("depth_repr", "log")
        assert reference.delta_epe == 0.0
        inverse = table.row("depth_repr", "inverse")
        assert inverse.delta_epe == pytest.approx(inverse.epe - reference.epe)
        assert all(r.n_seeds == 1 and r.epe is not None and np.isfinite(r.epe) for r in table.rows)
        assert len(logger.events("ablation_variant")) == 5

        path = table.write_csv(tmp_path / "ablation.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == TABLE_COLUMNS
        assert len(frame) == 5

    def test_unknown_factor_fails_before_training(self):
        with pytest.raises(ConfigError, match="unknown ablation factors"):
            run_ablation(_config(), [], [], factors=["anchors", "optimizer"], progress=False)

    def test_factor_table_covers_variants(self):
        assert FACTORS["attention"][1][0] == "ours_global_local"
        assert "none" in FACTORS["attention"][1]
        assert FACTORS["upsampler"][1][0] == "attention"


class TestEvaluateModel:

    def test_average_over_sequences(self):
        model = Tracker(micro_config(), np.random.default_rng(0))
        report = evaluate_model(model, _sequences(2, 7))
        assert report.n_tracks == 2 * 64
        assert report.name == "mean"

    def test_no_sequences(self):
        model = Tracker(micro_config(), np.random.default_rng(0))
        with pytest.raises(ConfigError):
            evaluate_model(model, [])
