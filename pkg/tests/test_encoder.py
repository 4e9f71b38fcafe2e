"""
Unit tests for the feature encoder and correlation features.

Tests cover:
- Pyramid level shapes, zero-weight output and determinism
- Frame-size divisibility errors
- correlation_features width, constant / orthogonal maps, linearity
- depth_correlation values, depth-scale equivariance and reprs
- Gradients with respect to features, uv and depth estimates
"""

import math

import numpy as np
import pytest

from src.components.encoder import (
    Encoder, EncoderConfig, FeaturePyramid, correlation_features, depth_correlation,
    extract_pyramid,
)
from src.components.errors import InvalidDepthError, ShapeError
from src.components.numerics import Tensor, grad_check


def _encoder(seed=0, **overrides) -> Encoder:
    cfg = dict(feature_dim=8, n_residual_blocks=1)
    cfg.update(overrides)
    return Encoder(EncoderConfig(**cfg), np.random.default_rng(seed))


def _constant_pyramid(vector: np.ndarray, size: int = 32) -> FeaturePyramid:
    levels = []
    for stride in (2, 4, 8):
        n = size // stride
        levels.append((stride, Tensor(np.broadcast_to(vector, (1, n, n, vector.size)).copy())))
    return FeaturePyramid(levels, vector.size)


# ---------------------------------------------------------------------------
# Backbone
# ---------------------------------------------------------------------------

class TestEncoder:

    def test_level_shapes(self):
        pyramid = extract_pyramid(np.zeros((64, 64, 3)), _encoder())
        shapes = [m.shape for _, m in pyramid.levels]
        assert shapes == [(1, 32, 32, 8), (1, 16, 16, 8), (1, 8, 8, 8)]
        assert pyramid.strides == [2, 4, 8]

    def test_zero_weights_give_zero_maps(self):
        enc = _encoder()
        for p in enc.parameters():
            p.data[...] = 0.0
        frame = np.random.default_rng(1).uniform(size=(16, 16, 3))
        pyramid = extract_pyramid(frame, enc)
        for _, fmap in pyramid.levels:
            assert not fmap.data.any()

    def test_bitwise_deterministic(self):
        frame = np.random.default_rng(2).uniform(size=(2, 16, 24, 3))
        a, b = _encoder(seed=5)(frame), _encoder(seed=5)(frame)
        for (_, ma), (_, mb) in zip(a.levels, b.levels):
            np.testing.assert_array_equal(ma.data, mb.data)

    def test_indivisible_frame(self):
        with pytest.raises(ShapeError, match="divisible by the largest pyramid stride 8"):
            extract_pyramid(np.zeros((20, 16, 3)), _encoder())

    def test_strides_must_double(self):
        with pytest.raises(ValueError):
            EncoderConfig(strides=(2, 6))

    def test_gradients_reach_weights(self):
        enc = _encoder(activation="gelu", feature_dim=2)
        frame = Tensor(np.random.default_rng(3).uniform(size=(1, 8, 8, 3)))
        loss = lambda _: sum((m * m).sum() for _, m in enc(frame).levels)
        params = [enc.stem.weight, enc.downsample[0].weight]
        assert grad_check(loss, params, n_samples=12) < 1e-4


# ---------------------------------------------------------------------------
# Correlation features
# ---------------------------------------------------------------------------

class TestCorrelationFeatures:

    def test_width_is_147_for_radius_three(self):
        pyramid = _encoder()(np.zeros((1, 32, 32, 3)))
        out = correlation_features(np.ones((1, 5, 8)), pyramid, np.full((1, 5, 2), 7.0), 3)
        assert out.shape == (1, 5, 147)

    def test_constant_map_equal_to_feature(self):
        f = np.array([1.0, 2.0, 2.0])
        out = correlation_features(f, _constant_pyramid(f), np.array([10.5, 3.25]), 2)
        np.testing.assert_allclose(out.data, np.full(75, 9.0))

    def test_orthogonal_feature_gives_zero(self):
        pyramid = _constant_pyramid(np.array([1.0, 0.0, 0.0]))
        out = correlation_features(np.array([0.0, 3.0, -1.0]), pyramid, np.array([4.0, 4.0]), 1)
        assert not out.data.any()

    def test_linear_in_track_feature(self):
        pyramid = _encoder()(np.random.default_rng(4).uniform(size=(1, 32, 32, 3)))
        uv = np.array([[[9.3, 14.1], [20.0, 3.5]]])
        a = np.random.default_rng(5).normal(size=(1, 2, 8))
        b = np.random.default_rng(6).normal(size=(1, 2, 8))
        lhs = correlation_features(2.0 * a - b, pyramid, uv, 2).data
        rhs = 2.0 * correlation_features(a, pyramid, uv, 2).data - \
            correlation_features(b, pyramid, uv, 2).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_gradients_wrt_features_and_uv(self):
        rng = np.random.default_rng(7)
        maps = [Tensor(rng.normal(size=(1, 32 // s, 32 // s, 3))) for s in (2, 4, 8)]
        pyramid = FeaturePyramid(list(zip((2, 4, 8), maps)), 3)
        feat = Tensor(rng.normal(size=(1, 2, 3)))
        uv = Tensor(np.array([[[13.3, 9.7], [21.1, 17.9]]]))
        weights = Tensor(rng.normal(size=(1, 2, 27)))
        f = lambda _: (correlation_features(feat, pyramid, uv, 1) * weights).sum()
        assert grad_check(f, [feat, uv, maps[0]]) < 1e-4


# ---------------------------------------------------------------------------
# Depth correlation
# ---------------------------------------------------------------------------

class TestDepthCorrelation:

    def test_constant_depth_matching_estimate(self):
        out = depth_correlation(math.log(3.0), np.full((12, 12), 3.0), np.array([5.0, 6.0]), 3)
        assert out.shape == (49,)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-15)

    def test_constant_two_against_unit_estimate(self):
        out = depth_correlation(0.0, np.full((8, 8), 2.0), np.array([3.5, 2.5]), 1)
        np.testing.assert_allclose(out.data, math.log(2.0))

    def test_scale_equivariance(self):
        rng = np.random.default_rng(8)
        depth = rng.uniform(1.0, 5.0, size=(2, 16, 16))
        uv = rng.uniform(0, 15, size=(2, 4, 2))
        log_d = rng.normal(size=(2, 4, 1))
        c = 3.7
        base = depth_correlation(log_d, depth, uv, 2).data
        scaled = depth_correlation(log_d + math.log(c), c * depth, uv, 2).data
        np.testing.assert_allclose(scaled, base, atol=1e-9)

    @pytest.mark.parametrize("repr_, expected", [("linear", 1.0), ("inverse", -0.5)])
    def test_other_representations(self, repr_, expected):
        out = depth_correlation(0.0, np.full((8, 8), 2.0), np.array([3.0, 3.0]), 1, repr_)
        np.testing.assert_allclose(out.data, expected)

    def test_non_positive_depth(self):
        depth = np.ones((8, 8))
        depth[3, 3] = 0.0
        with pytest.raises(InvalidDepthError):
            depth_correlation(0.0, depth, np.array([3.0, 3.0]), 1)

    def test_gradients_wrt_uv_and_estimate(self):
        rng = np.random.default_rng(9)
        depth = Tensor(rng.uniform(1.0, 4.0, size=(1, 10, 10)))
        uv = Tensor(np.array([[[4.3, 5.6], [2.2, 7.7]]]))
        log_d = Tensor(rng.normal(size=(1, 2, 1)))
        weights = Tensor(rng.normal(size=(1, 2, 9)))
        f = lambda _: (depth_correlation(log_d, depth, uv, 1) * weights).sum()
        assert grad_check(f, [uv, log_d, depth]) < 1e-4
