from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from src.components.encoder import EncoderConfig, FeaturePyramid, correlation_features, depth_correlation
from src.components.errors import NonFiniteError, ShapeError
from src.components.numerics import (
    Linear, Module, Tensor, concat, embedding_width, sigmoid, sinusoidal_embedding,
)
from src.components.tracker.config import TrackerConfig


@dataclass
class TokenTensor:
    tokens: Tensor  # (T, N, D)
    width: int

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.tokens.data)):
            raise NonFiniteError("token tensor contains non-finite entries", "tokens")


class TokenBuilder(Module):
    """Assembles one token per track and frame.

    Content is ``[feature, correlation, depth correlation, visibility,
    embedded displacement from frame 0]``; embedded position and time are
    projected to the same width and added.
    """

    def __init__(self, encoder_cfg: EncoderConfig, cfg: TrackerConfig, rng: np.random.Generator):
        self.radius = encoder_cfg.correlation_radius
        self.n_freqs = cfg.n_frequencies
        self.depth_repr = cfg.depth_repr
        self.embed_depth = cfg.embed_position_depth
        self.width = (encoder_cfg.feature_dim + encoder_cfg.correlation_dim + encoder_cfg.n_taps
                      + 1 + embedding_width(3, cfg.n_frequencies))
        n_pos = 3 if cfg.embed_position_depth else 2
        self.position_proj = Linear(embedding_width(n_pos, cfg.n_frequencies), self.width, rng)
        self.time_proj = Linear(embedding_width(1, cfg.n_frequencies), self.width, rng)

    def forward(self, uv: np.ndarray, log_d: np.ndarray, vis_logit: np.ndarray,
                track_feat: Tensor, pyramid: FeaturePyramid, depths: np.ndarray) -> TokenTensor:
        T, N = uv.shape[:2]
        if depths.shape[0] != T:
            raise ShapeError(f"tokens: {depths.shape[0]} depth frames for a {T}-frame state")
        H, W = depths.shape[1:]
        size = np.array([W, H], dtype=uv.dtype)

        corr = correlation_features(track_feat, pyramid, uv, self.radius)
        dcorr = depth_correlation(log_d, depths, uv, self.radius, self.depth_repr)
        vis = sigmoid(Tensor(vis_logit))
        displacement = np.concatenate([(uv - uv[:1]) / size, log_d - log_d[:1]], axis=-1)
        content = concat([track_feat, corr, dcorr, vis,
                          sinusoidal_embedding(Tensor(displacement), self.n_freqs)], axis=-1)

        position = uv / size
        if self.embed_depth:
            position = np.concatenate([position, log_d], axis=-1)
        pos = self.position_proj(sinusoidal_embedding(Tensor(position), self.n_freqs))
        t = (np.arange(T, dtype=uv.dtype) / max(T - 1, 1)).reshape(T, 1, 1)
        time = self.time_proj(sinusoidal_embedding(Tensor(t), self.n_freqs))
        return TokenTensor(content + pos + time, self.width)
