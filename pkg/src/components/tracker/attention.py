from __future__ import annotations
from typing import Optional

import numpy as np

from src.components.errors import ConfigError
from src.components.numerics import (
    AttentionCounter, LayerNorm, MLP, Module, MultiHeadAttention, Tensor, concat, gather,
    scatter_add,
)
from src.components.tracker.layout import AttentionLayout
from src.components.tracker.utils import (
    ATTENTION_VARIANTS, LOCAL_VARIANTS, TAG_FULL, TAG_LOCAL, TAG_TEMPORAL_TRACKS,
    TAG_TEMPORAL_VIRTUAL, TAG_TRACKS_FROM_VIRTUAL, TAG_VIRTUAL_FROM_TRACKS, TAG_VIRTUAL_SELF,
    VIRTUAL_VARIANTS,
)


class SpatialAttention(Module):
    """Per-frame attention across tracks.

    ``ours_*`` variants route global context through virtual tokens that read
    only the anchor tracks; ``cotracker`` lets them read every track;
    ``ours_global_local`` first mixes tokens inside small spatial patches.
    """

    def __init__(self, dim: int, n_heads: int, variant: str, rng: np.random.Generator):
        if variant not in ATTENTION_VARIANTS:
            raise ConfigError(f"unknown attention variant '{variant}'")
        self.variant = variant
        if variant in LOCAL_VARIANTS:
            self.local_norm = LayerNorm(dim)
            self.local_attn = MultiHeadAttention(dim, n_heads, rng)
        if variant in VIRTUAL_VARIANTS:
            self.virtual_norm = LayerNorm(dim)
            self.track_kv_norm = LayerNorm(dim)
            self.read_attn = MultiHeadAttention(dim, n_heads, rng)
            self.virtual_self_norm = LayerNorm(dim)
            self.virtual_self_attn = MultiHeadAttention(dim, n_heads, rng)
            self.track_norm = LayerNorm(dim)
            self.virtual_kv_norm = LayerNorm(dim)
            self.write_attn = MultiHeadAttention(dim, n_heads, rng)
        if variant == "full":
            self.full_norm = LayerNorm(dim)
            self.full_attn = MultiHeadAttention(dim, n_heads, rng)

    def forward(self, tokens: Tensor, virtual: Optional[Tensor], layout: AttentionLayout,
                counter: Optional[AttentionCounter] = None):
        if self.variant == "none":
            return tokens, virtual
        if self.variant == "full":
            if tokens.shape[1] > layout.full_attention_cap:
                raise ConfigError(f"full spatial attention over {tokens.shape[1]} tracks exceeds "
                                  f"the cap of {layout.full_attention_cap}")
            x = self.full_norm(tokens)
            return tokens + self.full_attn(x, counter=counter, tag=TAG_FULL), virtual

        if self.variant in LOCAL_VARIANTS and layout.patches:
            tokens = tokens + self._local(tokens, layout, counter)

        kv = self.track_kv_norm(tokens)
        if self.variant != "cotracker":
            kv = gather(kv, layout.anchor_index, axis=1)
        virtual = virtual + self.read_attn(self.virtual_norm(virtual), kv, counter=counter,
                                           tag=TAG_VIRTUAL_FROM_TRACKS)
        virtual = virtual + self.virtual_self_attn(self.virtual_self_norm(virtual),
                                                   counter=counter, tag=TAG_VIRTUAL_SELF)
        tokens = tokens + self.write_attn(self.track_norm(tokens), self.virtual_kv_norm(virtual),
                                          counter=counter, tag=TAG_TRACKS_FROM_VIRTUAL)
        return tokens, virtual

    def _local(self, tokens: Tensor, layout: AttentionLayout,
               counter: Optional[AttentionCounter]) -> Tensor:
        T, N, D = tokens.shape
        groups: dict[int, list[np.ndarray]] = {}
        for patch in layout.patches:
            groups.setdefault(patch.size, []).append(patch)
        x = self.local_norm(tokens)
        outputs, members = [], []
        for size, patches in groups.items():
            index = np.stack(patches)
            y = self.local_attn(gather(x, index, axis=1), counter=counter, tag=TAG_LOCAL)
            outputs.append(y.reshape(T, index.size, D))
            members.append(index.reshape(-1))
        return scatter_add(concat(outputs, axis=1), np.concatenate(members), N, axis=1)


class TemporalAttention(Module):
    """Self-attention along time within each track."""

    def __init__(self, dim: int, n_heads: int, rng: np.random.Generator):
        self.norm = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, n_heads, rng)

    def forward(self, x: Tensor, counter: Optional[AttentionCounter] = None,
                tag: str = TAG_TEMPORAL_TRACKS) -> Tensor:
        xt = x.swapaxes(0, 1)
        return x + self.attn(self.norm(xt), counter=counter, tag=tag).swapaxes(0, 1)


class TransformerBlock(Module):
    """Temporal attention, then spatial attention, then a token MLP."""

    def __init__(self, dim: int, n_heads: int, mlp_ratio: int, variant: str,
                 rng: np.random.Generator):
        self.temporal = TemporalAttention(dim, n_heads, rng)
        self.spatial = SpatialAttention(dim, n_heads, variant, rng)
        self.mlp_norm = LayerNorm(dim)
        self.mlp = MLP(dim, dim * mlp_ratio, dim, rng)

    def forward(self, tokens: Tensor, virtual: Optional[Tensor], layout: AttentionLayout,
                counter: Optional[AttentionCounter] = None):
        tokens = self.temporal(tokens, counter, TAG_TEMPORAL_TRACKS)
        if virtual is not None:
            virtual = self.temporal(virtual, counter, TAG_TEMPORAL_VIRTUAL)
        tokens, virtual = self.spatial(tokens, virtual, layout, counter)
        tokens = tokens + self.mlp(self.mlp_norm(tokens))
        if virtual is not None:
            virtual = virtual + self.mlp(self.mlp_norm(virtual))
        return tokens, virtual
