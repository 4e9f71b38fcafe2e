"""
Unit tests for the CSV series behind the figures (plot_data.py).

Tests cover:
- Cost series columns, predicted against counted cost, linear vs quadratic growth
- Training series read from a metrics log
- Unknown kinds and missing logs
"""

import json

import numpy as np
import pandas as pd
import pytest

from src.components.errors import ConfigError
from src.components.plot_data import (
    COST_COLUMNS, TRAINING_COLUMNS, cost_series, emit_plot_data, training_series,
)
from src.components.tracker import fit_residual
from src.components.training.utils import LOSS_COMPONENTS


def _metrics_log(path, n=3):
    with open(path, "w", encoding="utf-8") as f:
        for step in range(n):
            record = {"step": step, **{k: float(step) for k in LOSS_COMPONENTS}, "lr": 1e-3,
                      "grad_norm": 0.5, "val_epe": None if step < n - 1 else 2.0}
            f.write(json.dumps(record) + "\n")
    return path


class TestCostSeries:

    def test_columns_and_agreement(self):
        frame = cost_series(4, 8, 16, [64, 128, 256])
        assert list(frame.columns) == COST_COLUMNS
        assert len(frame) == 3 * 4
        assert (frame["predicted_mac"] == frame["measured_mac"]).all()

    def test_scaling_shape(self):
        counts = [64, 128, 256, 512, 1024]
        frame = cost_series(4, 8, 16, counts, variants=("ours_global", "full"))
        ours = frame[frame["variant"] == "ours_global"]["measured_mac"].tolist()
        full = frame[frame["variant"] == "full"]["measured_mac"].tolist()
        assert fit_residual(counts, ours, 1) < 1.0
        assert fit_residual(counts, full, 1) > 1.0
        assert fit_residual(counts, full, 2) < 1.0


class TestTrainingSeries:

    def test_columns_from_log(self, tmp_path):
        frame = training_series(_metrics_log(tmp_path / "metrics.jsonl"))
        assert list(frame.columns) == TRAINING_COLUMNS
        assert frame["step"].tolist() == [0, 1, 2]
        assert "grad_norm" not in frame.columns
        assert np.isnan(frame["val_epe"].iloc[0]) and frame["val_epe"].iloc[-1] == 2.0

    def test_emit_writes_csv(self, tmp_path):
        path = emit_plot_data("training", tmp_path / "out" / "train.csv",
                              metrics_path=_metrics_log(tmp_path / "metrics.jsonl"))
        assert list(pd.read_csv(path).columns) == TRAINING_COLUMNS

    def test_missing_log(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            training_series(tmp_path / "nope.jsonl")

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown plot-data kind"):
            emit_plot_data("loss", tmp_path / "x.csv")
