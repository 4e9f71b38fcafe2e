from __future__ import annotations
from dataclasses import dataclass as std_dataclass
from typing import Literal, Optional

import numpy as np
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from src.components.errors import ShapeError
from src.components.numerics import (
    Conv2d, LayerNorm, Linear, MLP, Module, MultiHeadAttention, Tensor, as_tensor, concat, gather,
    gelu, softmax,
)
from src.components.upsampler.utils import (
    ATTENTION_VARIANTS, DEFAULT_BLOCKS, DEFAULT_KERNEL, LEARNED_VARIANTS, WEIGHT_SUM_TOLERANCE,
)


@dataclass(config=ConfigDict(extra="forbid"))
class UpsamplerConfig:
    kernel: int = DEFAULT_KERNEL
    n_blocks: int = DEFAULT_BLOCKS
    n_heads: int = 2
    feature_dim: int = 32
    variant: Literal["attention", "attention_no_alibi", "convex", "bilinear", "nearest"] = "attention"
    alibi_scale: float = 1.0

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be a positive odd integer, got {self.kernel}")
        if self.feature_dim % self.n_heads:
            raise ValueError(f"feature_dim {self.feature_dim} not divisible by {self.n_heads} heads")
        if self.alibi_scale < 0:
            raise ValueError("alibi_scale must be >= 0")

    def slopes(self) -> np.ndarray:
        """Per-head distance penalties ``-scale * 2**-h``."""
        if self.variant == "attention_no_alibi":
            return np.zeros(self.n_heads)
        return -self.alibi_scale * 2.0 ** -np.arange(self.n_heads, dtype=np.float64)


@std_dataclass
class UpsampleWeightMap:
    weights: Tensor              # (H, W, k*k), convex per pixel
    neighbor_index: np.ndarray   # (H, W, k*k) into the row-major coarse grid
    kernel: int
    stride: int
    coarse_shape: tuple[int, int]
    attention: Optional[np.ndarray] = None  # last block, head-averaged

    @property
    def shape(self) -> tuple[int, int]:
        return self.neighbor_index.shape[:2]

    def validate(self) -> None:
        w = self.weights.data
        if w.shape != self.neighbor_index.shape:
            raise ShapeError(f"weights {w.shape} and neighbor_index {self.neighbor_index.shape} differ")
        if np.any(w < 0) or np.any(np.abs(w.sum(-1) - 1.0) > WEIGHT_SUM_TOLERANCE):
            raise ShapeError("upsample weights must be non-negative and sum to one per pixel")
        n = self.coarse_shape[0] * self.coarse_shape[1]
        if self.neighbor_index.min() < 0 or self.neighbor_index.max() >= n:
            raise ShapeError(f"neighbor index outside the {self.coarse_shape} coarse grid")


def neighborhood(H: int, W: int, stride: int, kernel: int) -> tuple[np.ndarray, np.ndarray]:
    """Clamped k x k coarse neighbours of each pixel and their L1 distances.

    The neighbourhood is centred on ``floor(u / stride), floor(v / stride)``;
    distances are in coarse-grid units.
    """
    h, w = H // stride, W // stride
    v, u = np.mgrid[0:H, 0:W].astype(np.float64)
    up, vp = u / stride, v / stride
    cx = np.floor(up).astype(np.int64)[..., None]
    cy = np.floor(vp).astype(np.int64)[..., None]
    half = kernel // 2
    dy, dx = np.meshgrid(np.arange(-half, half + 1), np.arange(-half, half + 1), indexing="ij")
    nx = np.clip(cx + dx.reshape(-1), 0, w - 1)
    ny = np.clip(cy + dy.reshape(-1), 0, h - 1)
    dist = np.abs(up[..., None] - nx) + np.abs(vp[..., None] - ny)
    return ny * w + nx, dist


def _check_sizes(H: int, W: int, stride: int, coarse_shape: tuple[int, ...]) -> tuple[int, int]:
    if H % stride or W % stride:
        raise ShapeError(f"frame {H}x{W} is not divisible by the upsampling stride {stride}")
    h, w = H // stride, W // stride
    if tuple(coarse_shape[:2]) != (h, w):
        raise ShapeError(f"coarse grid {tuple(coarse_shape[:2])} does not match {h}x{w}")
    return h, w


# ---------------------------------------------------------------------------
# Fixed-weight baselines
# ---------------------------------------------------------------------------

def bilinear_weights(H: int, W: int, stride: int, kernel: int) -> UpsampleWeightMap:
    index, _ = neighborhood(H, W, stride, kernel)
    h, w = H // stride, W // stride
    v, u = np.mgrid[0:H, 0:W].astype(np.float64)
    nx, ny = index % w, index // w
    up = np.clip(u / stride, 0, w - 1)[..., None]
    vp = np.clip(v / stride, 0, h - 1)[..., None]
    tent = np.maximum(0.0, 1.0 - np.abs(up - nx)) * np.maximum(0.0, 1.0 - np.abs(vp - ny))
    # Clamped borders repeat neighbours; drop duplicates before normalising.
    half = kernel // 2
    dy, dx = np.meshgrid(np.arange(-half, half + 1), np.arange(-half, half + 1), indexing="ij")
    cx = np.floor(u / stride).astype(np.int64)[..., None]
    cy = np.floor(v / stride).astype(np.int64)[..., None]
    canonical = (cx + dx.reshape(-1) == nx) & (cy + dy.reshape(-1) == ny)
    tent = tent * canonical
    weights = tent / tent.sum(-1, keepdims=True)
    return UpsampleWeightMap(Tensor(weights), index, kernel, stride, (h, w))


def nearest_weights(H: int, W: int, stride: int, kernel: int) -> UpsampleWeightMap:
    index, dist = neighborhood(H, W, stride, kernel)
    one_hot = np.zeros(dist.shape)
    np.put_along_axis(one_hot, dist.argmin(-1)[..., None], 1.0, axis=-1)
    return UpsampleWeightMap(Tensor(one_hot), index, kernel, stride, (H // stride, W // stride))


# ---------------------------------------------------------------------------
# Learned upsampler
# ---------------------------------------------------------------------------

class UpsampleBlock(Module):
    """Fine pixels cross-attend to their coarse neighbours, then an MLP."""

    def __init__(self, dim: int, n_heads: int, rng: np.random.Generator):
        self.query_norm = LayerNorm(dim)
        self.key_norm = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, n_heads, rng)
        self.mlp_norm = LayerNorm(dim)
        self.mlp = MLP(dim, 2 * dim, dim, rng)

    def forward(self, fine: Tensor, neighbors: Tensor, bias: Tensor):
        out, weights = self.attn(self.query_norm(fine), self.key_norm(neighbors), bias=bias,
                                 return_weights=True)
        fine = fine + out
        return fine + self.mlp(self.mlp_norm(fine)), weights


class Upsampler(Module):
    """Predicts per-pixel convex weights over coarse neighbours from frame 0."""

    def __init__(self, config: UpsamplerConfig, coarse_dim: int, stride: int,
                 rng: np.random.Generator):
        self.config = config
        self.stride = stride
        D = config.feature_dim
        k2 = config.kernel * config.kernel
        if config.variant in LEARNED_VARIANTS:
            self.coarse_proj = Linear(coarse_dim, D, rng)
            self.image_conv = Conv2d(3, D, 3, rng, padding=1)
            self.fuse_conv = Conv2d(2 * D, D, 3, rng, padding=1)
            self.weight_head = MLP(D, D, k2, rng)
        self.blocks = [UpsampleBlock(D, config.n_heads, rng) for _ in range(config.n_blocks)] \
            if config.variant in ATTENTION_VARIANTS else []

    def forward(self, frame0, coarse_feat) -> UpsampleWeightMap:
        return self.compute_weights(frame0, coarse_feat)

    def compute_weights(self, frame0, coarse_feat) -> UpsampleWeightMap:
        frame0, coarse = as_tensor(frame0), as_tensor(coarse_feat)
        H, W = frame0.shape[:2]
        h, w = _check_sizes(H, W, self.stride, coarse.shape)
        cfg, r = self.config, self.stride
        if cfg.variant == "bilinear":
            return bilinear_weights(H, W, r, cfg.kernel)
        if cfg.variant == "nearest":
            return nearest_weights(H, W, r, cfg.kernel)

        index, dist = neighborhood(H, W, r, cfg.kernel)
        D, k2 = cfg.feature_dim, cfg.kernel * cfg.kernel
        coarse_flat = self.coarse_proj(coarse.reshape(h * w, coarse.shape[-1]))
        v, u = np.mgrid[0:H, 0:W]
        nearest_cell = (v // r) * w + (u // r)
        upsampled = gather(coarse_flat, nearest_cell.reshape(-1), axis=0).reshape(1, H, W, D)
        image = gelu(self.image_conv(frame0.reshape(1, H, W, 3)))
        fine = gelu(self.fuse_conv(concat([upsampled, image], axis=-1))).reshape(H * W, 1, D)

        attention = None
        if self.blocks:
            neighbors = gather(coarse_flat, index.reshape(H * W, k2), axis=0)
            bias = Tensor(cfg.slopes()[None, :, None, None] * dist.reshape(H * W, 1, 1, k2))
            for block in self.blocks:
                fine, attn = block(fine, neighbors, bias)
            attention = attn.data.mean(axis=1)[:, 0, :].reshape(H, W, k2)

        weights = softmax(self.weight_head(fine.reshape(H * W, D)), axis=-1)
        return UpsampleWeightMap(weights.reshape(H, W, k2), index, cfg.kernel, r, (h, w), attention)


def create_upsampler(config: UpsamplerConfig, coarse_dim: int, stride: int,
                     rng: np.random.Generator) -> Upsampler:
    return Upsampler(config, coarse_dim, stride, rng)
