"""
Unit tests for the synthetic RGB-D generator and dataset container.

Tests cover:
- SceneConfig validation (depth range, T, unknown keys)
- Determinism and frame-0 anchoring of ground-truth tracks
- Sprite kinematics, static scenes and occlusion against a brute-force oracle
- Depth-noise isolation from ground truth
- Anchor-frame clips replaying the same scene with a shifted time origin, anchor names
- save_dataset / load_dataset round trip and corruption errors
- Zero-motion baselines
"""

import json

import numpy as np
import pytest

from src.components.errors import ConfigError, DatasetFormatError, MissingGroundTruthError
from src.components.synthdata import (
    SceneConfig, SequenceCollection, SpriteSpec, anchor_frames, generate_sequence, generate_split,
    load_dataset, save_dataset, write_index, zero_motion_baseline, zero_motion_depth_baseline,
)


def _scene(**overrides) -> SceneConfig:
    base = dict(T=5, H=16, W=24, n_sprites=0, sprites=[], camera_translation=(0.0, 0.0),
                camera_depth_scale=1.0)
    base.update(overrides)
    return SceneConfig(**base)


def _sampled(**overrides) -> SceneConfig:
    base = dict(T=6, H=32, W=32, n_sprites=3, sprite_size_range=(6, 12))
    base.update(overrides)
    return SceneConfig(**base)


# ---------------------------------------------------------------------------
# Config validation
# ---------------------------------------------------------------------------

class TestSceneConfig:

    def test_defaults_are_valid(self):
        cfg = SceneConfig()
        assert cfg.depth_range[0] > 0

    @pytest.mark.parametrize("depth_range", [(0.0, 5.0), (5.0, 5.0), (4.0, 2.0)])
    def test_bad_depth_range(self, depth_range):
        with pytest.raises(ValueError):
            SceneConfig(depth_range=depth_range)

    def test_short_sequence_rejected(self):
        with pytest.raises(ValueError):
            SceneConfig(T=1)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            SceneConfig(n_sprite=3)

    def test_sprite_larger_than_frame(self):
        cfg = _scene(n_sprites=1, sprites=[SpriteSpec(x=0, y=0, width=25, height=4, depth=2.0)])
        with pytest.raises(ConfigError, match="larger than"):
            generate_sequence(cfg, seed=0)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

class TestGenerateSequence:

    def test_deterministic(self):
        a = generate_sequence(_sampled(), seed=7)
        b = generate_sequence(_sampled(), seed=7)
        for name in ("rgb", "depth", "gt_tracks", "gt_visibility"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_different_seeds_differ(self):
        a = generate_sequence(_sampled(), seed=1)
        b = generate_sequence(_sampled(), seed=2)
        assert not np.array_equal(a.rgb, b.rgb)

    def test_tracks_anchored_at_frame_zero(self):
        seq = generate_sequence(_sampled(), seed=3)
        v, u = np.mgrid[0:32, 0:32]
        np.testing.assert_array_equal(seq.gt_tracks[0, ..., 0], u)
        np.testing.assert_array_equal(seq.gt_tracks[0, ..., 1], v)
        np.testing.assert_array_equal(seq.gt_tracks[0, ..., 2], seq.depth[0])
        assert seq.gt_visibility[0].all()

    def test_visible_points_are_in_bounds(self):
        seq = generate_sequence(_sampled(max_sprite_speed=4.0, max_camera_speed=2.0), seed=4)
        uv = seq.gt_tracks[..., :2][seq.gt_visibility]
        assert (uv[:, 0] >= 0).all() and (uv[:, 0] <= 31).all()
        assert (uv[:, 1] >= 0).all() and (uv[:, 1] <= 31).all()

    def test_depth_positive_and_rgb_in_range(self):
        seq = generate_sequence(_sampled(depth_noise_std=0.2, depth_noise_model="additive"), 5)
        assert (seq.depth > 0).all()
        assert seq.rgb.min() >= 0.0 and seq.rgb.max() <= 1.0

    def test_single_sprite_follows_velocity(self):
        sprite = SpriteSpec(x=4, y=3, width=5, height=4, depth=2.0, velocity=(2.0, 1.0))
        seq = generate_sequence(_scene(n_sprites=1, sprites=[sprite]), seed=0)
        for t in range(seq.T):
            block = seq.gt_tracks[t, 3:7, 4:9]
            v, u = np.mgrid[3:7, 4:9]
            np.testing.assert_allclose(block[..., 0], u + 2 * t)
            np.testing.assert_allclose(block[..., 1], v + t)
            np.testing.assert_allclose(block[..., 2], 2.0)

    def test_static_scene_is_constant(self):
        seq = generate_sequence(_scene(), seed=11)
        np.testing.assert_array_equal(seq.gt_tracks, np.broadcast_to(seq.gt_tracks[:1],
                                                                     seq.gt_tracks.shape))
        assert seq.gt_visibility.all()

    def test_far_sprite_hidden_exactly_when_covered(self):
        near = SpriteSpec(x=8, y=4, width=6, height=6, depth=2.0)
        far = SpriteSpec(x=0, y=5, width=4, height=3, depth=5.0, velocity=(3.0, 0.0))
        seq = generate_sequence(_scene(T=7, n_sprites=2, sprites=[near, far]), seed=0)
        for t in range(seq.T):
            for y in range(5, 8):
                for x in range(0, 4):
                    u, v = x + 3 * t, y
                    in_frame = 0 <= u <= 23
                    covered = 8 <= u < 14 and 4 <= v < 10
                    assert seq.gt_visibility[t, y, x] == (in_frame and not covered), (t, y, x)

    def test_depth_noise_leaves_ground_truth(self):
        clean = generate_sequence(_sampled(), seed=9)
        noisy = generate_sequence(_sampled(depth_noise_std=0.05), seed=9)
        np.testing.assert_array_equal(clean.gt_tracks, noisy.gt_tracks)
        np.testing.assert_array_equal(clean.gt_visibility, noisy.gt_visibility)
        np.testing.assert_array_equal(clean.rgb, noisy.rgb)
        assert not np.array_equal(clean.depth, noisy.depth)

    def test_anchor_frame_replays_scene(self):
        base = generate_sequence(_sampled(T=8), seed=12)
        shifted = generate_sequence(_sampled(T=8), seed=12, anchor_frame=3)
        np.testing.assert_array_equal(shifted.rgb[:5], base.rgb[3:])
        np.testing.assert_array_equal(shifted.depth[:5], base.depth[3:])
        assert shifted.anchor_frame == 3

    def test_anchor_frame_names(self):
        assert anchor_frames(8, ["first", "middle", "last"]) == {"first": 0, "middle": 4, "last": 7}
        with pytest.raises(ConfigError, match="middle"):
            anchor_frames(8, ["centre"])


# ---------------------------------------------------------------------------
# Container
# ---------------------------------------------------------------------------

class TestContainer:

    def test_round_trip_bitwise(self, tmp_path):
        seq = generate_sequence(_sampled(depth_noise_std=0.01), seed=21)
        loaded = load_dataset(save_dataset(seq, tmp_path / "seq"))
        for name in ("rgb", "depth", "gt_tracks", "gt_visibility"):
            original, restored = getattr(seq, name), getattr(loaded, name)
            assert original.dtype == restored.dtype
            np.testing.assert_array_equal(original, restored)

    def test_meta_records_seed(self, tmp_path):
        path = save_dataset(generate_sequence(_scene(), seed=33), tmp_path / "seq")
        meta = json.loads((path / "meta.json").read_text())
        assert meta["seed"] == 33
        assert meta["tensors"]["depth"]["shape"] == [5, 16, 24]

    def test_truncated_tensor_names_file(self, tmp_path):
        path = save_dataset(generate_sequence(_scene(), seed=1), tmp_path / "seq")
        depth_file = path / "depth.bin"
        depth_file.write_bytes(depth_file.read_bytes()[:-3])
        with pytest.raises(DatasetFormatError, match=str(5 * 16 * 24 * 8)) as err:
            load_dataset(path)
        assert "depth.bin" in str(err.value)

    def test_wrong_format_rejected(self, tmp_path):
        path = save_dataset(generate_sequence(_scene(), seed=1), tmp_path / "seq")
        meta = json.loads((path / "meta.json").read_text())
        meta["format"] = "something-else"
        (path / "meta.json").write_text(json.dumps(meta))
        with pytest.raises(DatasetFormatError):
            load_dataset(path)

    def test_collection_split(self, tmp_path):
        names = generate_split(_scene(), [1, 2], {"first": 0}, tmp_path, "train", progress=False)
        write_index(tmp_path, {"train": names})
        collection = SequenceCollection.open(tmp_path, "train")
        assert len(collection) == 2
        assert [s.seed for s in collection] == [1, 2]


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

class TestBaselines:

    def test_static_scene_zero(self):
        seq = generate_sequence(_scene(), seed=0)
        assert zero_motion_baseline(seq) == 0.0
        assert zero_motion_depth_baseline(seq) == 0.0

    def test_covering_sprite_three_four_five(self):
        sprite = SpriteSpec(x=0, y=0, width=24, height=16, depth=3.0, velocity=(3.0, 4.0))
        seq = generate_sequence(_scene(T=2, n_sprites=1, sprites=[sprite]), seed=0)
        assert zero_motion_baseline(seq) == pytest.approx(5.0)

    def test_matches_brute_force(self):
        seq = generate_sequence(_sampled(), seed=5)
        total, count = 0.0, 0
        for t in range(1, seq.T):
            for y in range(seq.H):
                for x in range(seq.W):
                    du, dv = seq.gt_tracks[t, y, x, :2] - seq.gt_tracks[0, y, x, :2]
                    total += float(np.hypot(du, dv))
                    count += 1
        assert zero_motion_baseline(seq) == pytest.approx(total / count)

    def test_missing_ground_truth(self):
        seq = generate_sequence(_scene(), seed=0)
        seq.gt_tracks = None
        with pytest.raises(MissingGroundTruthError):
            zero_motion_baseline(seq)
