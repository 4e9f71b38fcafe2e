from __future__ import annotations
from dataclasses import asdict, field
from typing import Literal, Optional

from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from src.components.encoder import EncoderConfig
from src.components.tracker.utils import VISIBLE_LOGIT
from src.components.upsampler import UpsamplerConfig

AttentionVariant = Literal["none", "cotracker", "ours_global", "ours_global_local", "full"]


@dataclass(config=ConfigDict(extra="forbid"))
class TrackerConfig:
    stride: int = 4
    hidden_dim: int = 128
    n_heads: int = 4
    n_blocks: int = 3
    n_iterations: int = 4
    mlp_ratio: int = 4
    window: int = 8
    overlap: Optional[int] = None
    n_virtual: int = 16
    anchor_grid: tuple[int, int] = (4, 4)
    patch_size: int = 4
    attention_variant: AttentionVariant = "ours_global_local"
    depth_repr: Literal["log", "linear", "inverse"] = "log"
    embed_position_depth: bool = True
    n_frequencies: int = 10
    visibility_init_logit: float = VISIBLE_LOGIT
    full_attention_cap: int = 4096
    sparse_mode: bool = False

    def __post_init__(self):
        if self.hidden_dim % self.n_heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} not divisible by n_heads {self.n_heads}")
        if self.window < 2:
            raise ValueError(f"window must be at least 2, got {self.window}")
        if self.overlap is not None and not 0 < self.overlap < self.window:
            raise ValueError(f"overlap must satisfy 0 < overlap < window, got {self.overlap}")
        if self.n_iterations < 1 or self.n_blocks < 1:
            raise ValueError("n_iterations and n_blocks must be >= 1")
        if self.n_virtual < 1 or min(self.anchor_grid) < 1 or self.patch_size < 1:
            raise ValueError("n_virtual, anchor grid and patch_size must be >= 1")

    @property
    def window_overlap(self) -> int:
        return self.overlap if self.overlap is not None else max(1, self.window // 2)

    @property
    def n_anchors(self) -> int:
        return self.anchor_grid[0] * self.anchor_grid[1]


@dataclass(config=ConfigDict(extra="forbid"))
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    upsampler: UpsamplerConfig = field(default_factory=UpsamplerConfig)

    def __post_init__(self):
        if self.tracker.stride not in self.encoder.strides:
            raise ValueError(f"tracker stride {self.tracker.stride} is not a pyramid stride "
                             f"{self.encoder.strides}")

    def to_dict(self) -> dict:
        return asdict(self)
