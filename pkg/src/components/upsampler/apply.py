from __future__ import annotations
from typing import Optional

import numpy as np

from src.components.errors import ShapeError
from src.components.numerics import Tensor, as_tensor, gather, no_grad
from src.components.track_state import TrackState
from src.components.upsampler.upsampler import UpsampleWeightMap


def upsample_values(values, wmap: UpsampleWeightMap) -> Tensor:
    """Convex combination of coarse ``(T, N, C)`` values into ``(T, H*W, C)``.

    Written as ``ref + sum_j w_j (v_j - ref)`` around the centre neighbour so
    that constant fields come through unchanged.
    """
    values = as_tensor(values)
    H, W = wmap.shape
    n_coarse = wmap.coarse_shape[0] * wmap.coarse_shape[1]
    if values.ndim != 3 or values.shape[1] != n_coarse:
        raise ShapeError(f"upsample: expected (T, {n_coarse}, C) coarse values, got {values.shape}")
    if wmap.neighbor_index.min() < 0 or wmap.neighbor_index.max() >= n_coarse:
        raise ShapeError(f"upsample: neighbor index outside the {wmap.coarse_shape} coarse grid")
    k2 = wmap.neighbor_index.shape[-1]
    index = wmap.neighbor_index.reshape(H * W, k2)
    ref = gather(values, index[:, k2 // 2], axis=1)                  # (T, HW, C)
    neighbors = gather(values, index, axis=1)                         # (T, HW, k2, C)
    weights = wmap.weights.reshape(1, H * W, k2, 1)
    delta = (neighbors - ref.reshape(values.shape[0], H * W, 1, values.shape[2])) * weights
    return ref + delta.sum(axis=2)


def fine_queries(frame0_depth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel query positions and frame-0 log depth, row-major."""
    depth = np.asarray(frame0_depth, dtype=np.float64)
    H, W = depth.shape
    v, u = np.mgrid[0:H, 0:W].astype(np.float64)
    return np.stack([u.reshape(-1), v.reshape(-1)], axis=-1), np.log(depth.reshape(-1, 1))


def apply_upsample(coarse_state: TrackState, wmap: UpsampleWeightMap,
                   frame0_depth: Optional[np.ndarray] = None) -> TrackState:
    """Lift a coarse dense state to one track per pixel.

    Without ``frame0_depth`` the absolute coarse (uv, log d, visibility
    logit) are averaged. With it, the motion relative to each coarse query is
    averaged and added to the per-pixel queries, so frame 0 equals the
    pixel grid.
    """
    wmap.validate()
    H, W = wmap.shape
    T = coarse_state.T
    relative = frame0_depth is not None
    if relative:
        query_uv, query_log_d = fine_queries(frame0_depth)
        uv = coarse_state.uv - coarse_state.query_uv[None]
        log_d = coarse_state.log_d - coarse_state.query_log_d[None]
    else:
        uv, log_d = coarse_state.uv, coarse_state.log_d
    with no_grad():
        fine = upsample_values(np.concatenate([uv, log_d, coarse_state.vis_logit], axis=-1),
                               wmap).data
    fine_uv, fine_log_d, fine_vis = fine[..., :2], fine[..., 2:3], fine[..., 3:4]
    if relative:
        fine_uv = fine_uv + query_uv[None]
        fine_log_d = fine_log_d + query_log_d[None]
    else:
        query_uv, query_log_d = fine_uv[0].copy(), fine_log_d[0].copy()
    return TrackState(uv=fine_uv, log_d=fine_log_d, vis_logit=fine_vis,
                      track_feat=np.zeros((T, H * W, 0)), query_uv=query_uv,
                      query_log_d=query_log_d, meta={**coarse_state.meta, "upsampled": True})
