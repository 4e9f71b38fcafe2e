from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from src.components.errors import InvalidQueryError, ShapeError
from src.components.numerics import Tensor, bilinear_sample, no_grad
from src.components.numerics.tensor import _sigmoid
from src.components.synthdata.container import read_container, write_container
from src.components.synthdata.utils import TRACKS_FORMAT

VISIBLE_LOGIT = 10.0  # initial logit, sigmoid ~ 1

STATE_FIELDS = ("uv", "log_d", "vis_logit", "track_feat")


@dataclass
class TrackState:
    uv: np.ndarray          # (T, N, 2) full-resolution pixels
    log_d: np.ndarray       # (T, N, 1)
    vis_logit: np.ndarray   # (T, N, 1)
    track_feat: np.ndarray  # (T, N, D_f)
    query_uv: np.ndarray    # (N, 2)
    query_log_d: np.ndarray  # (N, 1)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        T, N = self.uv.shape[:2]
        expected = {"uv": (T, N, 2), "log_d": (T, N, 1), "vis_logit": (T, N, 1)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"TrackState.{name} has shape {getattr(self, name).shape}, "
                                 f"expected {shape}")
        if self.track_feat.shape[:2] != (T, N):
            raise ShapeError(f"TrackState.track_feat has shape {self.track_feat.shape}")

    @property
    def T(self) -> int:
        return self.uv.shape[0]

    @property
    def N(self) -> int:
        return self.uv.shape[1]

    @property
    def depth(self) -> np.ndarray:
        return np.exp(self.log_d[..., 0])

    @property
    def visibility(self) -> np.ndarray:
        return _sigmoid(self.vis_logit[..., 0]) > 0.5

    def copy(self) -> "TrackState":
        return TrackState(self.uv.copy(), self.log_d.copy(), self.vis_logit.copy(),
                          self.track_feat.copy(), self.query_uv.copy(), self.query_log_d.copy(),
                          dict(self.meta))

    def frames(self, start: int, stop: int) -> "TrackState":
        return TrackState(self.uv[start:stop].copy(), self.log_d[start:stop].copy(),
                          self.vis_logit[start:stop].copy(), self.track_feat[start:stop].copy(),
                          self.query_uv.copy(), self.query_log_d.copy(), dict(self.meta))

    def write_frames(self, start: int, other: "TrackState") -> None:
        stop = start + other.T
        for name in STATE_FIELDS:
            getattr(self, name)[start:stop] = getattr(other, name)

    def tracks(self, indices: np.ndarray) -> "TrackState":
        return TrackState(self.uv[:, indices], self.log_d[:, indices], self.vis_logit[:, indices],
                          self.track_feat[:, indices], self.query_uv[indices],
                          self.query_log_d[indices], dict(self.meta))

    def to_dict(self):
        return {"T": self.T, "N": self.N, "feature_dim": self.track_feat.shape[-1],
                "visible_fraction": float(self.visibility.mean()) if self.uv.size else None,
                **self.meta}


def replicate(values: np.ndarray, T: int) -> np.ndarray:
    return np.repeat(values[None], T, axis=0)


def init_tracks(queries: np.ndarray, frame0_depth: np.ndarray, T: int,
                feature_map: Optional[Tensor | np.ndarray] = None, stride: int = 1,
                feature_dim: int = 0, visibility_logit: float = VISIBLE_LOGIT) -> TrackState:
    """Replicate each query across ``T`` frames.

    ``feature_map`` is the ``(h, w, D_f)`` frame-0 level at ``stride``; track
    features are sampled there at ``query / stride``. Without a map the
    features are zeros of width ``feature_dim``.
    """
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 2)
    depth = np.asarray(frame0_depth, dtype=np.float64)
    H, W = depth.shape
    N = queries.shape[0]
    outside = ((queries[:, 0] < 0) | (queries[:, 0] > W - 1)
               | (queries[:, 1] < 0) | (queries[:, 1] > H - 1))
    if outside.any():
        bad = queries[np.flatnonzero(outside)[0]]
        raise InvalidQueryError(f"query ({bad[0]}, {bad[1]}) lies outside the {W}x{H} frame")
    with no_grad():
        if N:
            d0 = bilinear_sample(Tensor(depth[..., None]), Tensor(queries)).data[:, 0]
        else:
            d0 = np.zeros(0)
        if np.any(d0 <= 0):
            raise InvalidQueryError("frame-0 depth at a query location is not positive")
        if feature_map is not None:
            fmap = feature_map.data if isinstance(feature_map, Tensor) else np.asarray(feature_map)
            fmap = fmap.reshape(fmap.shape[-3:])
            feat = bilinear_sample(Tensor(fmap), Tensor(queries / stride)).data if N else \
                np.zeros((0, fmap.shape[-1]))
        else:
            feat = np.zeros((N, feature_dim))
    log_d0 = np.log(d0)[:, None]
    return TrackState(
        uv=replicate(queries, T),
        log_d=replicate(log_d0, T),
        vis_logit=np.full((T, N, 1), float(visibility_logit)),
        track_feat=replicate(feat, T),
        query_uv=queries.copy(),
        query_log_d=log_d0.copy(),
    )


# ---------------------------------------------------------------------------
# Track files (same container as datasets)
# ---------------------------------------------------------------------------

def save_track_file(state: TrackState, path: Path, meta: Optional[dict] = None) -> Path:
    tensors = {"uv": state.uv, "log_d": state.log_d, "vis_logit": state.vis_logit,
               "query_uv": state.query_uv, "query_log_d": state.query_log_d}
    return write_container(path, TRACKS_FORMAT, tensors, {"kind": "tracks", **(meta or {})})


def load_track_file(path: Path) -> tuple[TrackState, dict]:
    meta, tensors = read_container(path, TRACKS_FORMAT)
    T, N = tensors["uv"].shape[:2]
    state = TrackState(uv=tensors["uv"], log_d=tensors["log_d"], vis_logit=tensors["vis_logit"],
                       track_feat=np.zeros((T, N, 0)), query_uv=tensors["query_uv"],
                       query_log_d=tensors["query_log_d"])
    return state, meta
