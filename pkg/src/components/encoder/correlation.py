from __future__ import annotations
from functools import lru_cache

import numpy as np

from src.components.errors import InvalidDepthError, ShapeError
from src.components.numerics import Tensor, as_tensor, bilinear_sample_batched, concat, exp, log
from src.components.encoder.backbone import FeaturePyramid
from src.components.encoder.utils import DEPTH_REPRS, MIN_SAMPLED_DEPTH


@lru_cache(maxsize=16)
def tap_offsets(radius: int) -> np.ndarray:
    """(2r+1)^2 offsets as (dx, dy), rows of dy outermost."""
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    dy, dx = np.meshgrid(r, r, indexing="ij")
    offsets = np.stack([dx.reshape(-1), dy.reshape(-1)], axis=-1)
    offsets.setflags(write=False)
    return offsets


def _grid_points(uv: Tensor, radius: int, scale: float = 1.0) -> Tensor:
    B, N, _ = uv.shape
    offsets = Tensor(tap_offsets(radius), dtype=uv.dtype)
    centers = uv if scale == 1.0 else uv / scale
    points = centers.reshape(B, N, 1, 2) + offsets
    return points.reshape(B, N * offsets.shape[0], 2)


def correlation_features(track_feat, pyramid: FeaturePyramid, uv, radius: int) -> Tensor:
    """Dot products between track features and pyramid features around ``uv``.

    Batched form: ``track_feat`` ``(B, N, D_f)``, ``uv`` ``(B, N, 2)`` in
    full-resolution pixels, pyramid maps ``(B, h, w, D_f)``; returns
    ``(B, N, n_levels * (2r+1)^2)``. A single ``(D_f,)`` feature with a
    ``(2,)`` location returns a flat vector.
    """
    feat, uv = as_tensor(track_feat), as_tensor(uv)
    single = feat.ndim == 1
    if single:
        feat, uv = feat.reshape(1, 1, -1), uv.reshape(1, 1, 2)
    B, N, D = feat.shape
    if uv.shape != (B, N, 2):
        raise ShapeError(f"correlation: uv shape {uv.shape} does not match features {feat.shape}")
    taps = (2 * radius + 1) ** 2
    parts = []
    for stride, fmap in pyramid.levels:
        if fmap.shape[0] != B or fmap.shape[-1] != D:
            raise ShapeError(f"correlation: level stride {stride} has shape {fmap.shape}, "
                             f"expected batch {B} and {D} channels")
        sampled = bilinear_sample_batched(fmap, _grid_points(uv, radius, float(stride)))
        sampled = sampled.reshape(B, N, taps, D)
        parts.append((sampled * feat.reshape(B, N, 1, D)).sum(axis=-1))
    out = concat(parts, axis=-1)
    return out.reshape(-1) if single else out


def depth_correlation(log_d_est, depth_map, uv, radius: int, depth_repr: str = "log") -> Tensor:
    """Difference between sampled depth and the current estimate on a full-res grid.

    ``depth_repr`` selects log (default), linear or inverse-depth differences.
    Batched shapes: ``log_d_est`` ``(B, N, 1)``, ``depth_map`` ``(B, H, W)``,
    ``uv`` ``(B, N, 2)``.
    """
    if depth_repr not in DEPTH_REPRS:
        raise ValueError(f"unknown depth representation '{depth_repr}'")
    log_d, depth, uv = as_tensor(log_d_est), as_tensor(depth_map), as_tensor(uv)
    single = depth.ndim == 2
    if single:
        log_d, depth, uv = log_d.reshape(1, 1, 1), depth.reshape(1, *depth.shape), uv.reshape(1, 1, 2)
    B, H, W = depth.shape
    N = uv.shape[1]
    taps = (2 * radius + 1) ** 2
    sampled = bilinear_sample_batched(depth.reshape(B, H, W, 1), _grid_points(uv, radius))
    sampled = sampled.reshape(B, N, taps)
    if np.any(sampled.data <= MIN_SAMPLED_DEPTH):
        raise InvalidDepthError("depth_correlation: sampled a non-positive depth value")
    if depth_repr == "log":
        out = log(sampled) - log_d
    elif depth_repr == "linear":
        out = sampled - exp(log_d)
    else:
        out = 1.0 / sampled - exp(-log_d)
    return out.reshape(-1) if single else out
