"""
Unit tests for the evaluation metrics.

Tests cover:
- endpoint_error subsets, frame-0 exclusion and empty subsets
- occlusion_iou including the empty-union case
- lift_to_camera pinhole geometry and depth checks
- tapvid3d_metrics against a loop-based oracle on random instances
- evaluate() on ground truth fed back as the prediction
- average_reports
"""

import math

import numpy as np
import pytest

from src.components.errors import (
    InvalidDepthError, InvalidQueryError, MissingGroundTruthError, ShapeError,
)
from src.components.metrics import (
    EvalReport, MetricsConfig, average_reports, endpoint_error, evaluate, ground_truth_for,
    lift_to_camera, occlusion_iou, state_from_ground_truth, tapvid3d_metrics, threshold_scale,
)
from src.components.synthdata import RgbdSequence, SceneConfig, generate_sequence


def _sequence(seed: int = 0) -> RgbdSequence:
    cfg = SceneConfig(T=4, H=16, W=16, n_sprites=2, sprite_size_range=(4, 8))
    return generate_sequence(cfg, seed=seed)


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

def _oracle_epe(pred, gt, vis):
    T, N = vis.shape
    groups = {"all": [], "vis": [], "occ": []}
    for t in range(1, T):
        for i in range(N):
            e = math.hypot(pred[t, i, 0] - gt[t, i, 0], pred[t, i, 1] - gt[t, i, 1])
            groups["all"].append(e)
            groups["vis" if vis[t, i] else "occ"].append(e)
    return {k: (sum(v) / len(v) if v else None) for k, v in groups.items()}


def _oracle_iou(pred_vis, gt_vis):
    inter = union = 0
    for p, g in zip(pred_vis.reshape(-1), gt_vis.reshape(-1)):
        inter += (not p) and (not g)
        union += (not p) or (not g)
    return 1.0 if union == 0 else inter / union


def _oracle_tapvid(pred, pred_vis, gt, gt_vis, thresholds, f, size):
    H, W = size
    cx, cy = (W - 1) / 2.0, (H - 1) / 2.0
    T, N = gt_vis.shape

    def lift(p):
        return ((p[0] - cx) * p[2] / f, (p[1] - cy) * p[2] / f, p[2])

    visible_depths = [gt[t, i, 2] for t in range(T) for i in range(N) if gt_vis[t, i]]
    all_depths = [gt[t, i, 2] for t in range(T) for i in range(N)]
    scale = float(np.median(visible_depths or all_depths))

    apds, jacs = [], []
    for thr in thresholds:
        delta = thr * scale
        within = n_vis = tp = fp = fn = 0
        for t in range(T):
            for i in range(N):
                a, b = lift(pred[t, i]), lift(gt[t, i])
                close = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b))) < delta
                g, p = bool(gt_vis[t, i]), bool(pred_vis[t, i])
                if g:
                    n_vis += 1
                    within += close
                if g and p and close:
                    tp += 1
                elif p:
                    fp += 1
                if g and not (p and close):
                    fn += 1
        apds.append(100.0 * within / n_vis if n_vis else None)
        jacs.append(100.0 * tp / (tp + fp + fn) if tp + fp + fn else 100.0)
    apd = sum(apds) / len(apds) if apds[0] is not None else None
    oa = 100.0 * sum(bool(p) == bool(g) for p, g in zip(pred_vis.reshape(-1),
                                                          gt_vis.reshape(-1))) / pred_vis.size
    return apd, sum(jacs) / len(jacs), oa


def _random_instance(rng):
    T, N = int(rng.integers(1, 5)), int(rng.integers(1, 6))
    gt = np.concatenate([rng.uniform(0, 15, (T, N, 2)), rng.uniform(1, 5, (T, N, 1))], -1)
    pred = gt.copy()
    pred[..., :2] += rng.normal(0, 0.5, (T, N, 2))
    pred[..., 2] *= np.exp(rng.normal(0, 0.05, (T, N)))
    gt_vis = rng.uniform(size=(T, N)) < 0.7
    pred_vis = rng.uniform(size=(T, N)) < 0.7
    thresholds = tuple(float(x) for x in rng.uniform(0.01, 0.3, int(rng.integers(1, 4))))
    return pred, pred_vis, gt, gt_vis, thresholds


# ---------------------------------------------------------------------------
# 2D metrics
# ---------------------------------------------------------------------------

class TestEndpointError:

    def test_excludes_frame_zero(self):
        gt = np.zeros((2, 1, 2))
        pred = np.array([[[9.0, 9.0]], [[3.0, 4.0]]])
        epe = endpoint_error(pred, gt, np.ones((2, 1), dtype=bool))
        assert epe.all == pytest.approx(5.0)
        assert epe.vis == pytest.approx(5.0)
        assert epe.occ is None

    def test_matches_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            T, N = int(rng.integers(2, 5)), int(rng.integers(1, 6))
            gt, pred = rng.normal(size=(T, N, 2)), rng.normal(size=(T, N, 2))
            vis = rng.uniform(size=(T, N)) < 0.5
            epe = endpoint_error(pred, gt, vis)
            expected = _oracle_epe(pred, gt, vis)
            for key in ("all", "vis", "occ"):
                got = getattr(epe, key)
                if expected[key] is None:
                    assert got is None
                else:
                    assert got == pytest.approx(expected[key], abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            endpoint_error(np.zeros((2, 3, 2)), np.zeros((2, 4, 2)), np.ones((2, 3), dtype=bool))


class TestOcclusionIoU:

    def test_nothing_occluded_is_one(self):
        vis = np.ones((3, 4), dtype=bool)
        assert occlusion_iou(vis, vis) == 1.0

    def test_half_overlap(self):
        gt = np.array([[False, False, True, True]])
        pred = np.array([[False, True, False, True]])
        assert occlusion_iou(pred, gt) == pytest.approx(1.0 / 3.0)

    def test_matches_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            shape = (int(rng.integers(1, 5)), int(rng.integers(1, 6)))
            p, g = rng.uniform(size=shape) < 0.5, rng.uniform(size=shape) < 0.5
            assert occlusion_iou(p, g) == pytest.approx(_oracle_iou(p, g), abs=1e-9)


# ---------------------------------------------------------------------------
# 3D metrics
# ---------------------------------------------------------------------------

class TestLiftToCamera:

    def test_principal_point_is_centred(self):
        out = lift_to_camera(np.array([[2.0, 1.0, 2.0], [4.0, 1.0, 2.0]]), 2.0, (3, 5))
        np.testing.assert_allclose(out[0], [0.0, 0.0, 2.0])
        np.testing.assert_allclose(out[1], [2.0, 0.0, 2.0])

    def test_non_positive_depth_rejected(self):
        with pytest.raises(InvalidDepthError):
            lift_to_camera(np.array([[0.0, 0.0, 0.0]]), 1.0, (4, 4))


class TestTapvid3d:

    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        gt = np.concatenate([rng.uniform(0, 7, (3, 4, 2)), rng.uniform(1, 3, (3, 4, 1))], -1)
        vis = rng.uniform(size=(3, 4)) < 0.8
        vis[0, 0] = True
        res = tapvid3d_metrics(gt, vis, gt, vis, (0.01, 0.1), 8.0, (8, 8))
        assert res.apd3d == pytest.approx(100.0)
        assert res.aj == pytest.approx(100.0)
        assert res.oa == pytest.approx(100.0)

    def test_threshold_is_strict(self):
        gt = np.array([[[3.5, 3.5, 1.0]]])
        pred = np.array([[[3.5, 3.5, 1.5]]])
        vis = np.ones((1, 1), dtype=bool)
        res = tapvid3d_metrics(pred, vis, gt, vis, (0.5,), 8.0, (8, 8))
        assert res.per_threshold_apd == [0.0]
        assert res.aj == 0.0

    def test_no_visible_points(self):
        gt = np.array([[[1.0, 1.0, 2.0]]])
        vis = np.zeros((1, 1), dtype=bool)
        res = tapvid3d_metrics(gt, vis, gt, vis, (0.1,), 8.0, (4, 4))
        assert res.apd3d is None
        assert res.aj == 100.0

    def test_scale_is_median_visible_depth(self):
        gt = np.array([[[0.0, 0.0, 1.0], [0.0, 0.0, 3.0], [0.0, 0.0, 100.0]]])
        vis = np.array([[True, True, False]])
        assert threshold_scale(gt, vis) == pytest.approx(2.0)

    def test_matches_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            pred, pred_vis, gt, gt_vis, thresholds = _random_instance(rng)
            res = tapvid3d_metrics(pred, pred_vis, gt, gt_vis, thresholds, 16.0, (16, 16))
            apd, aj, oa = _oracle_tapvid(pred, pred_vis, gt, gt_vis, thresholds, 16.0, (16, 16))
            if apd is None:
                assert res.apd3d is None
            else:
                assert res.apd3d == pytest.approx(apd, abs=1e-9)
            assert res.aj == pytest.approx(aj, abs=1e-9)
            assert res.oa == pytest.approx(oa, abs=1e-9)


# ---------------------------------------------------------------------------
# Sequence evaluation
# ---------------------------------------------------------------------------

class TestEvaluate:

    def test_ground_truth_scores_perfectly(self):
        seq = _sequence()
        report = evaluate(state_from_ground_truth(seq), seq)
        assert report.epe_all == pytest.approx(0.0, abs=1e-12)
        assert report.occ_iou == 1.0
        assert report.aj == pytest.approx(100.0)
        assert report.oa == pytest.approx(100.0)
        assert report.depth_error == pytest.approx(0.0, abs=1e-12)
        assert report.n_tracks == 16 * 16
        assert report.focal_length == seq.focal_length

    def test_shifted_prediction(self):
        seq = _sequence(1)
        pred = state_from_ground_truth(seq)
        pred.uv[1:, :, 0] += 1.0
        assert evaluate(pred, seq).epe_all == pytest.approx(1.0)

    def test_focal_length_override(self):
        seq = _sequence()
        report = evaluate(state_from_ground_truth(seq), seq, MetricsConfig(focal_length=10.0))
        assert report.focal_length == 10.0

    def test_ground_truth_at_query_pixels(self):
        seq = _sequence()
        tracks, vis = ground_truth_for(seq, np.array([[3.2, 4.9]]))
        np.testing.assert_array_equal(tracks[:, 0], seq.gt_tracks[:, 5, 3])
        np.testing.assert_array_equal(vis[:, 0], seq.gt_visibility[:, 5, 3])

    def test_query_outside_frame(self):
        with pytest.raises(InvalidQueryError):
            ground_truth_for(_sequence(), np.array([[16.0, 0.0]]))

    def test_missing_ground_truth(self):
        seq = _sequence()
        bare = RgbdSequence(rgb=seq.rgb, depth=seq.depth)
        with pytest.raises(MissingGroundTruthError):
            evaluate(state_from_ground_truth(seq), bare)

    def test_frame_count_mismatch(self):
        seq = _sequence()
        pred = state_from_ground_truth(seq).frames(0, 3)
        with pytest.raises(ShapeError):
            evaluate(pred, seq)

    def test_unknown_config_key(self):
        with pytest.raises(ValueError):
            MetricsConfig(threshold=(0.1,))


class TestAverageReports:

    def _report(self, epe, apd):
        return EvalReport(epe_all=epe, epe_vis=epe, epe_occ=None, occ_iou=1.0, apd3d=apd,
                          aj=50.0, oa=90.0, depth_error=0.1, thresholds=[0.1],
                          threshold_scale=2.0, focal_length=64.0, n_tracks=10, n_frames=4)

    def test_skips_missing_values(self):
        mean = average_reports([self._report(1.0, None), self._report(3.0, 40.0)])
        assert mean.epe_all == pytest.approx(2.0)
        assert mean.apd3d == pytest.approx(40.0)
        assert mean.epe_occ is None
        assert mean.n_tracks == 20

    def test_empty(self):
        with pytest.raises(ValueError):
            average_reports([])
