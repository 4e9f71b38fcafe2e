from __future__ import annotations
from typing import Optional

import numpy as np

from src.components.errors import InvalidQueryError, MissingGroundTruthError, ShapeError
from src.components.metrics.metrics import (
    EvalReport, MetricsConfig, endpoint_error, occlusion_iou, tapvid3d_metrics,
    threshold_scale,
)
from src.components.synthdata import RgbdSequence
from src.components.track_state import VISIBLE_LOGIT, TrackState


def _pixel_index(seq: RgbdSequence, query_uv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cols = np.rint(query_uv[:, 0]).astype(np.int64)
    rows = np.rint(query_uv[:, 1]).astype(np.int64)
    if cols.size and (cols.min() < 0 or cols.max() >= seq.W or rows.min() < 0
                      or rows.max() >= seq.H):
        raise InvalidQueryError(f"query outside the {seq.W}x{seq.H} ground-truth frame")
    return rows, cols


def ground_truth_for(seq: RgbdSequence, query_uv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth ``(T, N, 3)`` tracks and ``(T, N)`` visibility at the nearest query pixels."""
    if not seq.has_ground_truth:
        raise MissingGroundTruthError(f"sequence '{seq.name or seq.seed}' has no ground truth")
    rows, cols = _pixel_index(seq, np.asarray(query_uv, dtype=np.float64).reshape(-1, 2))
    return seq.gt_tracks[:, rows, cols], seq.gt_visibility[:, rows, cols]


def state_from_ground_truth(seq: RgbdSequence) -> TrackState:
    """Dense TrackState holding a sequence's ground truth, one track per pixel."""
    if not seq.has_ground_truth:
        raise MissingGroundTruthError(f"sequence '{seq.name or seq.seed}' has no ground truth")
    T, H, W = seq.T, seq.H, seq.W
    tracks = seq.gt_tracks.reshape(T, H * W, 3).astype(np.float64)
    vis = seq.gt_visibility.reshape(T, H * W, 1)
    log_d = np.log(tracks[..., 2:3])
    return TrackState(uv=tracks[..., :2].copy(), log_d=log_d,
                      vis_logit=np.where(vis, VISIBLE_LOGIT, -VISIBLE_LOGIT),
                      track_feat=np.zeros((T, H * W, 0)), query_uv=tracks[0, :, :2].copy(),
                      query_log_d=log_d[0].copy())


def evaluate(pred: TrackState, seq: RgbdSequence, config: Optional[MetricsConfig] = None,
             name: str = "") -> EvalReport:
    """Scores predicted tracks against ground truth at their query pixels; frame 0 is excluded."""
    config = config or MetricsConfig()
    if pred.T != seq.T:
        raise ShapeError(f"prediction has {pred.T} frames, ground truth {seq.T}")
    if pred.T < 2:
        raise ShapeError("evaluation needs at least two frames")
    gt, gt_vis = ground_truth_for(seq, pred.query_uv)
    pred_vis = pred.visibility
    epe = endpoint_error(pred.uv, gt[..., :2], gt_vis)
    focal = config.focal_length or seq.focal_length
    pred_uvd = np.concatenate([pred.uv, pred.depth[..., None]], axis=-1)
    tv = tapvid3d_metrics(pred_uvd[1:], pred_vis[1:], gt[1:], gt_vis[1:], config.thresholds,
                          focal, (seq.H, seq.W), config.scale_by_median_depth)
    depth_err = np.abs(pred.log_d[1:, :, 0] - np.log(gt[1:, :, 2]))
    scale = threshold_scale(gt[1:], gt_vis[1:]) if config.scale_by_median_depth else 1.0
    return EvalReport(
        epe_all=epe.all, epe_vis=epe.vis, epe_occ=epe.occ,
        occ_iou=occlusion_iou(pred_vis[1:], gt_vis[1:]),
        apd3d=tv.apd3d, aj=tv.aj, oa=tv.oa,
        depth_error=float(depth_err.mean()) if depth_err.size else None,
        thresholds=list(config.thresholds), threshold_scale=scale, focal_length=float(focal),
        n_tracks=pred.N, n_frames=pred.T, name=name or seq.name,
    )
