"""
Unit tests for run configuration resolution (run_config.py).

Tests cover:
- Preset defaults and the paper-scale preset's constants
- Merge order: preset, config file, --set overrides, dedicated flags
- Override parsing (JSON values with a string fallback)
- Unknown presets, keys and malformed overrides
- Disjoint per-split seed ranges
- Resolved config written next to the outputs
- Environment defaults from variables
"""

import json

import pytest
from pydantic import ValidationError

from src.components.errors import ConfigError
from src.components.numerics import read_json
from src.components.run_config import (
    DEFAULT_LOG_DIR, RUN_CONFIG_FILE, RunConfig, deep_merge, load_environment, parse_override,
    resolve_config, set_path, write_resolved,
)


class TestPresets:

    def test_desk_defaults(self):
        config = resolve_config("desk")
        assert (config.scene.T, config.scene.H, config.scene.W) == (12, 64, 64)
        assert config.train.steps == 2000
        assert config.train.lr == pytest.approx(3e-4)
        assert config.data.n_train == 64

    def test_paper_preset_constants(self):
        config = resolve_config("paper")
        tracker = config.model.tracker
        assert (tracker.n_virtual, tracker.patch_size, tracker.window) == (64, 6, 16)
        assert tracker.anchor_grid == (9, 12)
        assert config.train.schedule == "one_cycle"
        assert config.data.anchors == ["first", "middle", "last"]

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            resolve_config("huge")


class TestMerging:

    def test_deep_merge_keeps_siblings(self):
        merged = deep_merge({"a": {"b": 1, "c": 2}}, {"a": {"c": 3}})
        assert merged == {"a": {"b": 1, "c": 3}}

    def test_set_path_does_not_mutate(self):
        base = {"train": {"lr": 1.0}}
        out = set_path(base, "train.steps", 5)
        assert out == {"train": {"lr": 1.0, "steps": 5}}
        assert base == {"train": {"lr": 1.0}}

    def test_order_file_then_set_then_flags(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"train": {"steps": 10, "lr": 0.5}}), encoding="utf-8")
        config = resolve_config("desk", path, ["train.steps=20"], {"train.lr": 0.25})
        assert config.train.steps == 20
        assert config.train.lr == 0.25
        assert config.train.patch == (8, 10)

    def test_none_flags_are_skipped(self):
        assert resolve_config("desk", flags={"seed": None}).seed == 0


class TestOverrides:

    def test_json_value(self):
        assert parse_override("scene.sprite_size_range=[2,4]") == ("scene.sprite_size_range", [2, 4])

    def test_string_fallback(self):
        assert parse_override("model.tracker.depth_repr=inverse") == \
            ("model.tracker.depth_repr", "inverse")

    def test_malformed(self):
        with pytest.raises(ConfigError):
            parse_override("train.steps")

    def test_empty_path_segment(self):
        with pytest.raises(ConfigError):
            set_path({}, "train..steps", 1)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            resolve_config("desk", overrides=["train.bogus=1"])


class TestSeedsAndOutputs:

    def test_split_seeds_are_disjoint(self):
        data = resolve_config("desk").data
        seeds = {s: set(data.seeds(s, 3)) for s in ("train", "val", "test")}
        assert len(seeds["train"]) == 64
        assert not (seeds["train"] & seeds["val"]) and not (seeds["val"] & seeds["test"])
        assert min(seeds["train"]) == 3

    def test_write_resolved_round_trip(self, tmp_path):
        config = resolve_config("desk", overrides=["seed=7"])
        path = write_resolved(config, tmp_path)
        assert path == tmp_path / RUN_CONFIG_FILE
        assert RunConfig(**read_json(path)) == config

    def test_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("TRACK3D_OUTPUT_DIR", str(tmp_path / "o"))
        monkeypatch.delenv("TRACK3D_LOG_DIR", raising=False)
        env = load_environment(tmp_path / "missing.env")
        assert env.output_dir == tmp_path / "o"
        assert str(env.log_dir) == DEFAULT_LOG_DIR
