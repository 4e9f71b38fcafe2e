from __future__ import annotations
from dataclasses import dataclass, field

import numpy as np

from src.components.errors import ConfigError, ShapeError
from src.components.tracker.config import TrackerConfig
from src.components.tracker.utils import ANCHOR_VARIANTS, LOCAL_VARIANTS


@dataclass
class AttentionLayout:
    """Which tokens the spatial attention of one window may see.

    ``anchor_index`` and ``patches`` index the window's token set, which may
    hold appended anchor tracks after the dense or query tracks.
    """
    n_tracks: int
    n_virtual: int
    anchor_index: np.ndarray
    patches: list[np.ndarray] = field(default_factory=list)
    patch_size: int = 1
    variant: str = "ours_global_local"
    full_attention_cap: int = 4096
    n_appended: int = 0

    def __post_init__(self):
        self.anchor_index = np.asarray(self.anchor_index, dtype=np.int64)
        self.validate()

    @property
    def M(self) -> int:
        return int(self.anchor_index.size)

    @property
    def L(self) -> int:
        return self.patch_size * self.patch_size

    @property
    def n_queries(self) -> int:
        """Tracks that belong to the caller, excluding appended anchors."""
        return self.n_tracks - self.n_appended

    def validate(self) -> None:
        if self.n_virtual < 1:
            raise ConfigError("an attention layout needs at least one virtual track")
        if self.anchor_index.size and (self.anchor_index.min() < 0
                                       or self.anchor_index.max() >= self.n_tracks):
            raise ShapeError(f"anchor index out of range for {self.n_tracks} tracks")
        for patch in self.patches:
            if patch.size and (patch.min() < 0 or patch.max() >= self.n_tracks):
                raise ShapeError(f"patch index out of range for {self.n_tracks} tracks")

    def permuted(self, order: np.ndarray) -> "AttentionLayout":
        """Layout for tokens reordered so that new token i is old token ``order[i]``."""
        inverse = np.empty_like(order)
        inverse[order] = np.arange(order.size)
        return AttentionLayout(self.n_tracks, self.n_virtual, inverse[self.anchor_index],
                               [inverse[p] for p in self.patches], self.patch_size, self.variant,
                               self.full_attention_cap, self.n_appended)

    def to_dict(self):
        return {"n_tracks": self.n_tracks, "K": self.n_virtual, "M": self.M,
                "patch_size": self.patch_size, "n_patches": len(self.patches),
                "variant": self.variant, "n_appended": self.n_appended}


# ---------------------------------------------------------------------------
# Grid helpers
# ---------------------------------------------------------------------------

def grid_cells(h: int, w: int, grid: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Rows and columns of a uniform ``grid`` of cells over an ``h x w`` lattice."""
    gh, gw = grid
    if gh > h or gw > w:
        raise ConfigError(f"anchor grid {gh}x{gw} does not fit a {h}x{w} track grid")
    rows = np.floor((np.arange(gh) + 0.5) * h / gh).astype(np.int64)
    cols = np.floor((np.arange(gw) + 0.5) * w / gw).astype(np.int64)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return rr.reshape(-1), cc.reshape(-1)


def grid_patches(h: int, w: int, p: int) -> list[np.ndarray]:
    """Row-major p x p patches of an ``h x w`` track grid; edge patches may be smaller."""
    index = np.arange(h * w).reshape(h, w)
    return [index[i:i + p, j:j + p].reshape(-1)
            for i in range(0, h, p) for j in range(0, w, p)]


def grid_queries(h: int, w: int, stride: int, origin: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Full-resolution (u, v) of coarse cells, row-major."""
    rows = (origin[0] + np.arange(h)) * stride
    cols = (origin[1] + np.arange(w)) * stride
    vv, uu = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([uu.reshape(-1), vv.reshape(-1)], axis=-1).astype(np.float64)


def anchor_queries(H: int, W: int, cfg: TrackerConfig) -> np.ndarray:
    """Uniform full-frame anchor grid on coarse cell positions."""
    h, w = H // cfg.stride, W // cfg.stride
    rows, cols = grid_cells(h, w, cfg.anchor_grid)
    return np.stack([cols * cfg.stride, rows * cfg.stride], axis=-1).astype(np.float64)


# ---------------------------------------------------------------------------
# Layout builders
# ---------------------------------------------------------------------------

def _uses_local(cfg: TrackerConfig) -> bool:
    return cfg.attention_variant in LOCAL_VARIANTS and not cfg.sparse_mode


def dense_layout(h: int, w: int, cfg: TrackerConfig) -> AttentionLayout:
    """Full coarse grid; anchors are a subset of the dense tracks."""
    rows, cols = grid_cells(h, w, cfg.anchor_grid)
    anchors = rows * w + cols if cfg.attention_variant in ANCHOR_VARIANTS else np.arange(h * w)
    patches = grid_patches(h, w, cfg.patch_size) if _uses_local(cfg) else []
    return AttentionLayout(h * w, cfg.n_virtual, anchors, patches, cfg.patch_size,
                           cfg.attention_variant, cfg.full_attention_cap)


def patch_layout(ph: int, pw: int, cfg: TrackerConfig, use_anchors: bool = True) -> AttentionLayout:
    """Training patch of ``ph x pw`` tracks, optionally followed by M appended anchors."""
    n_patch = ph * pw
    patches = grid_patches(ph, pw, cfg.patch_size) if _uses_local(cfg) else []
    if use_anchors and cfg.attention_variant in ANCHOR_VARIANTS:
        anchors = np.arange(n_patch, n_patch + cfg.n_anchors)
        return AttentionLayout(n_patch + cfg.n_anchors, cfg.n_virtual, anchors, patches,
                               cfg.patch_size, cfg.attention_variant, cfg.full_attention_cap,
                               n_appended=cfg.n_anchors)
    return AttentionLayout(n_patch, cfg.n_virtual, np.arange(n_patch), patches, cfg.patch_size,
                           cfg.attention_variant, cfg.full_attention_cap)


def sparse_layout(n_queries: int, cfg: TrackerConfig) -> AttentionLayout:
    """Arbitrary queries plus an appended anchor grid; no local attention."""
    if cfg.attention_variant in ANCHOR_VARIANTS:
        anchors = np.arange(n_queries, n_queries + cfg.n_anchors)
        return AttentionLayout(n_queries + cfg.n_anchors, cfg.n_virtual, anchors, [],
                               cfg.patch_size, cfg.attention_variant, cfg.full_attention_cap,
                               n_appended=cfg.n_anchors)
    return AttentionLayout(n_queries, cfg.n_virtual, np.arange(n_queries), [], cfg.patch_size,
                           cfg.attention_variant, cfg.full_attention_cap)


def chunk_layout(n_tracks: int, K: int, M: int, patch_size: int, variant: str,
                 appended: bool = True, full_attention_cap: int = 1 << 30) -> AttentionLayout:
    """Synthetic layout for cost measurement: consecutive chunks of L tracks as patches."""
    L = patch_size * patch_size
    patches = [np.arange(i, min(i + L, n_tracks)) for i in range(0, n_tracks, L)] \
        if variant in LOCAL_VARIANTS else []
    if variant in ANCHOR_VARIANTS and appended:
        return AttentionLayout(n_tracks + M, K, np.arange(n_tracks, n_tracks + M), patches,
                               patch_size, variant, full_attention_cap, n_appended=M)
    if variant in ANCHOR_VARIANTS:
        if M > n_tracks:
            raise ConfigError(f"M={M} anchors cannot be a subset of {n_tracks} tracks")
        anchors = np.linspace(0, n_tracks - 1, M).round().astype(np.int64) if M < n_tracks \
            else np.arange(n_tracks)
        return AttentionLayout(n_tracks, K, anchors, patches, patch_size, variant,
                               full_attention_cap)
    return AttentionLayout(n_tracks, K, np.arange(n_tracks), patches, patch_size, variant,
                           full_attention_cap)
