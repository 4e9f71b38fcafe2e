from __future__ import annotations
from typing import Optional

import numpy as np

from src.components.numerics import (
    AttentionCounter, LayerNorm, Linear, Module, Parameter, Tensor, broadcast_to,
)
from src.components.tracker.attention import TransformerBlock
from src.components.tracker.config import TrackerConfig
from src.components.tracker.layout import AttentionLayout
from src.components.tracker.utils import VIRTUAL_VARIANTS

HEADS = ("uv", "depth", "feature", "visibility")


class UpdateTransformer(Module):
    """Maps tokens to per-track updates through ``n_blocks`` interleaved blocks."""

    def __init__(self, token_dim: int, feature_dim: int, cfg: TrackerConfig,
                 rng: np.random.Generator):
        dim = cfg.hidden_dim
        self.dim = dim
        self.input_proj = Linear(token_dim, dim, rng)
        self.uses_virtual = cfg.attention_variant in VIRTUAL_VARIANTS
        self.virtual = Parameter(rng.normal(0.0, 0.02, size=(cfg.n_virtual, dim))) \
            if self.uses_virtual else None
        self.blocks = [TransformerBlock(dim, cfg.n_heads, cfg.mlp_ratio, cfg.attention_variant, rng)
                       for _ in range(cfg.n_blocks)]
        self.head_norm = LayerNorm(dim)
        self.uv_head = Linear(dim, 2, rng)
        self.depth_head = Linear(dim, 1, rng)
        self.feature_head = Linear(dim, feature_dim, rng)
        self.visibility_head = Linear(dim, 1, rng)

    def head(self, name: str) -> Linear:
        return getattr(self, f"{name}_head")

    def zero_heads(self) -> None:
        for name in HEADS:
            self.head(name).zero_()

    def forward(self, tokens: Tensor, layout: AttentionLayout,
                counter: Optional[AttentionCounter] = None) -> Tensor:
        """``(T, N, token_dim)`` tokens to ``(T, N, hidden)`` normalised states."""
        x = self.input_proj(tokens)
        virtual = None
        if self.uses_virtual:
            T = x.shape[0]
            K = self.virtual.shape[0]
            virtual = broadcast_to(self.virtual.reshape(1, K, self.dim), (T, K, self.dim))
        for block in self.blocks:
            x, virtual = block(x, virtual, layout, counter)
        return self.head_norm(x)
