from __future__ import annotations
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.components.errors import ConfigError, ShapeError
from src.components.numerics import Tensor, get_default_dtype, no_grad
from src.components.track_state import STATE_FIELDS, TrackState
from src.components.tracker.layout import (
    AttentionLayout, anchor_queries, dense_layout, grid_queries, sparse_layout,
)
from src.components.tracker.model import Tracker
from src.components.tracker.utils import ANCHOR_VARIANTS
from src.components.upsampler import UpsampleWeightMap, apply_upsample

WindowCallback = Callable[[int, TrackState, Tensor], None]


def window_starts(T: int, S: int, overlap: int) -> list[int]:
    """Start frames of overlapping windows; the last one is clamped to end at ``T``."""
    if S < 2:
        raise ConfigError(f"window length must be at least 2, got {S}")
    if S > T:
        raise ConfigError(f"window length {S} exceeds the {T}-frame video")
    if not 0 < overlap < S:
        raise ConfigError(f"overlap must satisfy 0 < overlap < {S}, got {overlap}")
    starts = list(range(0, T - S + 1, S - overlap))
    if starts[-1] + S < T:
        starts.append(T - S)
    return starts


def _window_params(model: Tracker, window: Optional[int], overlap: Optional[int]) -> tuple[int, int]:
    cfg = model.config.tracker
    S = window or cfg.window
    if overlap is None:
        overlap = cfg.window_overlap if S == cfg.window else max(1, S // 2)
    return S, overlap


def _check_video(rgb: np.ndarray, depth: np.ndarray) -> None:
    if rgb.ndim != 4 or depth.shape != rgb.shape[:3]:
        raise ShapeError(f"expected (T, H, W, 3) rgb and (T, H, W) depth, got {rgb.shape} "
                         f"and {depth.shape}")


def run_windows(model: Tracker, rgb: np.ndarray, depth: np.ndarray, state: TrackState,
                layout: AttentionLayout, S: int, overlap: int,
                on_window: Optional[WindowCallback] = None) -> TrackState:
    """Slides ``refine_window`` over the video, writing each result into ``state``.

    A new window starts from the previous estimates on its overlapping
    prefix; the rest of it repeats the last overlapped frame.
    """
    starts = window_starts(state.T, S, overlap)
    with no_grad():
        for i, start in enumerate(starts):
            stop = start + S
            window = state.frames(start, stop)
            if i:
                known = starts[i - 1] + S - start
                for name in STATE_FIELDS:
                    values = getattr(window, name)
                    values[known:] = values[known - 1]
            out = model.forward_window(rgb[start:stop], depth[start:stop], window, layout)
            refined = out.to_state(window)
            state.write_frames(start, refined)
            if on_window is not None:
                on_window(start, refined, out.hidden)
    return state


def track_video(model: Tracker, rgb: np.ndarray, depth: np.ndarray, queries: np.ndarray,
                window: Optional[int] = None, overlap: Optional[int] = None) -> TrackState:
    """Tracks arbitrary frame-0 queries; anchor tracks are appended and dropped again."""
    rgb, depth = np.asarray(rgb, dtype=get_default_dtype()), np.asarray(depth, dtype=np.float64)
    _check_video(rgb, depth)
    cfg = model.config.tracker
    S, overlap = _window_params(model, window, overlap)
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 2)
    n_queries = queries.shape[0]
    T, H, W = depth.shape
    if cfg.attention_variant in ANCHOR_VARIANTS:
        all_queries = np.concatenate([queries, anchor_queries(H, W, cfg)], axis=0)
    else:
        all_queries = queries
    layout = sparse_layout(n_queries, cfg)
    state = model.init_state(rgb[0], depth[0], all_queries, T)
    state = run_windows(model, rgb, depth, state, layout, S, overlap)
    return state.tracks(np.arange(n_queries))


@dataclass
class DenseResult:
    coarse: TrackState
    fine: Optional[TrackState]
    grid: tuple[int, int]
    weight_maps: list[UpsampleWeightMap]

    def to_dict(self):
        return {"coarse": self.coarse.to_dict(), "grid": list(self.grid),
                "fine": self.fine.to_dict() if self.fine is not None else None,
                "n_windows": len(self.weight_maps)}


def track_dense(model: Tracker, rgb: np.ndarray, depth: np.ndarray, window: Optional[int] = None,
                overlap: Optional[int] = None, upsample: bool = True) -> DenseResult:
    """One coarse track per stride cell, optionally lifted to one track per pixel."""
    rgb, depth = np.asarray(rgb, dtype=get_default_dtype()), np.asarray(depth, dtype=np.float64)
    _check_video(rgb, depth)
    S, overlap = _window_params(model, window, overlap)
    T, H, W = depth.shape
    r = model.stride
    if H % r or W % r:
        raise ShapeError(f"frame {H}x{W} is not divisible by the tracking stride {r}")
    h, w = H // r, W // r
    layout = dense_layout(h, w, model.config.tracker)
    state = model.init_state(rgb[0], depth[0], grid_queries(h, w, r), T)

    fine = None
    maps: list[UpsampleWeightMap] = []
    if upsample:
        fine = TrackState(uv=np.zeros((T, H * W, 2)), log_d=np.zeros((T, H * W, 1)),
                          vis_logit=np.zeros((T, H * W, 1)), track_feat=np.zeros((T, H * W, 0)),
                          query_uv=np.zeros((H * W, 2)), query_log_d=np.zeros((H * W, 1)))

    def lift(start: int, refined: TrackState, hidden: Tensor) -> None:
        # One weight map per window, from its first frame.
        wmap = model.upsample_weights(rgb[start], hidden[0], (h, w))
        maps.append(wmap)
        lifted = apply_upsample(refined, wmap, depth[0])
        fine.write_frames(start, lifted)
        fine.query_uv, fine.query_log_d = lifted.query_uv, lifted.query_log_d

    state = run_windows(model, rgb, depth, state, layout, S, overlap, lift if upsample else None)
    return DenseResult(state, fine, (h, w), maps)
