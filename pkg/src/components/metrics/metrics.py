from __future__ import annotations
from dataclasses import asdict, dataclass as std_dataclass
from typing import Optional, Sequence

import numpy as np
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from src.components.errors import InvalidDepthError, ShapeError
from src.components.metrics.utils import DEFAULT_THRESHOLDS


@dataclass(config=ConfigDict(extra="forbid"))
class MetricsConfig:
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    scale_by_median_depth: bool = True
    focal_length: Optional[float] = None  # falls back to the dataset's intrinsics

    def __post_init__(self):
        if not self.thresholds or any(t <= 0 for t in self.thresholds):
            raise ValueError(f"thresholds must be positive, got {self.thresholds}")
        if self.focal_length is not None and self.focal_length <= 0:
            raise ValueError("focal_length must be positive")


@std_dataclass
class EndpointError:
    all: Optional[float]
    vis: Optional[float]
    occ: Optional[float]


@std_dataclass
class Tapvid3dResult:
    apd3d: Optional[float]
    aj: float
    oa: float
    thresholds: list[float]
    per_threshold_apd: list[Optional[float]]
    per_threshold_jaccard: list[float]


def _check_pair(name: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{name}: prediction {a.shape} and ground truth {b.shape} differ")


def _mean_or_none(values: np.ndarray) -> Optional[float]:
    return float(values.mean()) if values.size else None


# ---------------------------------------------------------------------------
# 2D metrics
# ---------------------------------------------------------------------------

def endpoint_error(pred: np.ndarray, gt: np.ndarray, gt_vis: np.ndarray) -> EndpointError:
    """Mean 2D error over frames 1..T-1; empty subsets are reported as ``None``."""
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    gt_vis = np.asarray(gt_vis, dtype=bool)
    _check_pair("endpoint_error", pred, gt)
    if gt_vis.shape != pred.shape[:2]:
        raise ShapeError(f"endpoint_error: visibility {gt_vis.shape} for tracks {pred.shape}")
    err = np.sqrt(((pred[1:] - gt[1:]) ** 2).sum(-1))
    vis = gt_vis[1:]
    return EndpointError(_mean_or_none(err), _mean_or_none(err[vis]), _mean_or_none(err[~vis]))


def occlusion_iou(pred_vis: np.ndarray, gt_vis: np.ndarray) -> float:
    """IoU of the occluded sets; 1.0 when neither has an occluded point."""
    pred_occ, gt_occ = ~np.asarray(pred_vis, dtype=bool), ~np.asarray(gt_vis, dtype=bool)
    _check_pair("occlusion_iou", pred_occ, gt_occ)
    union = np.count_nonzero(pred_occ | gt_occ)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred_occ & gt_occ) / union


# ---------------------------------------------------------------------------
# 3D metrics
# ---------------------------------------------------------------------------

def lift_to_camera(uvd: np.ndarray, focal_length: float, image_size: tuple[int, int]) -> np.ndarray:
    """Pinhole back-projection of ``(..., 3)`` (u, v, depth) with a centred principal point."""
    uvd = np.asarray(uvd, dtype=np.float64)
    if np.any(uvd[..., 2] <= 0) or not np.all(np.isfinite(uvd[..., 2])):
        raise InvalidDepthError("cannot lift points with non-positive depth")
    H, W = image_size
    cx, cy = (W - 1) / 2.0, (H - 1) / 2.0
    d = uvd[..., 2]
    x = (uvd[..., 0] - cx) * d / focal_length
    y = (uvd[..., 1] - cy) * d / focal_length
    return np.stack([x, y, d], axis=-1)


def threshold_scale(gt_uvd: np.ndarray, gt_vis: np.ndarray) -> float:
    """Median ground-truth depth over visible points (all points if none are)."""
    depth = np.asarray(gt_uvd)[..., 2]
    vis = np.asarray(gt_vis, dtype=bool)
    return float(np.median(depth[vis] if vis.any() else depth))


def tapvid3d_metrics(pred: np.ndarray, pred_vis: np.ndarray, gt: np.ndarray, gt_vis: np.ndarray,
                     thresholds: Sequence[float], focal_length: float,
                     image_size: tuple[int, int], scale_by_median_depth: bool = True
                     ) -> Tapvid3dResult:
    """APD3D, average Jaccard and occlusion accuracy, all in percent.

    A point is within ``delta`` when its 3D error is strictly below it. For
    Jaccard a positive must also be predicted visible.
    """
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    pred_vis, gt_vis = np.asarray(pred_vis, dtype=bool), np.asarray(gt_vis, dtype=bool)
    _check_pair("tapvid3d_metrics", pred, gt)
    _check_pair("tapvid3d_metrics", pred_vis, gt_vis)
    scale = threshold_scale(gt, gt_vis) if scale_by_median_depth else 1.0
    deltas = [float(t) * scale for t in thresholds]
    err = np.sqrt(((lift_to_camera(pred, focal_length, image_size)
                    - lift_to_camera(gt, focal_length, image_size)) ** 2).sum(-1))

    apd, jac = [], []
    for delta in deltas:
        within = err < delta
        apd.append(100.0 * float(within[gt_vis].mean()) if gt_vis.any() else None)
        tp = np.count_nonzero(gt_vis & pred_vis & within)
        fp = np.count_nonzero(pred_vis & ~(gt_vis & within))
        fn = np.count_nonzero(gt_vis & ~(pred_vis & within))
        denom = tp + fp + fn
        jac.append(100.0 * tp / denom if denom else 100.0)
    apd3d = float(np.mean(apd)) if gt_vis.any() else None
    oa = 100.0 * float((pred_vis == gt_vis).mean()) if gt_vis.size else 100.0
    return Tapvid3dResult(apd3d, float(np.mean(jac)), oa, deltas, apd, jac)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@std_dataclass
class EvalReport:
    epe_all: Optional[float]
    epe_vis: Optional[float]
    epe_occ: Optional[float]
    occ_iou: float
    apd3d: Optional[float]
    aj: float
    oa: float
    depth_error: Optional[float]
    thresholds: list[float]
    threshold_scale: float
    focal_length: float
    n_tracks: int
    n_frames: int
    name: str = ""

    def to_dict(self):
        return asdict(self)


def average_reports(reports: Sequence[EvalReport], name: str = "mean") -> EvalReport:
    """Field-wise mean; ``None`` entries are skipped."""
    if not reports:
        raise ValueError("no reports to average")

    def avg(key: str):
        values = [getattr(r, key) for r in reports if getattr(r, key) is not None]
        return float(np.mean(values)) if values else None

    first = reports[0]
    return EvalReport(
        epe_all=avg("epe_all"), epe_vis=avg("epe_vis"), epe_occ=avg("epe_occ"),
        occ_iou=avg("occ_iou"), apd3d=avg("apd3d"), aj=avg("aj"), oa=avg("oa"),
        depth_error=avg("depth_error"), thresholds=list(first.thresholds),
        threshold_scale=avg("threshold_scale"), focal_length=first.focal_length,
        n_tracks=sum(r.n_tracks for r in reports), n_frames=first.n_frames, name=name,
    )
