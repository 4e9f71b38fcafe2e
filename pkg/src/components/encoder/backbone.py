from __future__ import annotations
from dataclasses import dataclass as std_dataclass
from typing import Literal

import numpy as np
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from src.components.errors import ShapeError
from src.components.numerics import Conv2d, Module, Tensor, activate, as_tensor
from src.components.encoder.utils import (
    DEFAULT_CORRELATION_RADIUS, DEFAULT_FEATURE_DIM, DEFAULT_RESIDUAL_BLOCKS, DEFAULT_STRIDES,
)


@dataclass(config=ConfigDict(extra="forbid"))
class EncoderConfig:
    feature_dim: int = DEFAULT_FEATURE_DIM
    n_residual_blocks: int = DEFAULT_RESIDUAL_BLOCKS
    strides: tuple[int, ...] = DEFAULT_STRIDES
    activation: Literal["relu", "gelu"] = "relu"
    correlation_radius: int = DEFAULT_CORRELATION_RADIUS

    def __post_init__(self):
        if not self.strides or self.strides[0] != 2:
            raise ValueError(f"strides must start at 2, got {self.strides}")
        for a, b in zip(self.strides, self.strides[1:]):
            if b != 2 * a:
                raise ValueError(f"each stride must double the previous one, got {self.strides}")
        if self.feature_dim < 1 or self.n_residual_blocks < 0 or self.correlation_radius < 0:
            raise ValueError("feature_dim >= 1, n_residual_blocks >= 0, correlation_radius >= 0")

    @property
    def n_taps(self) -> int:
        return (2 * self.correlation_radius + 1) ** 2

    @property
    def correlation_dim(self) -> int:
        return len(self.strides) * self.n_taps


@std_dataclass
class FeaturePyramid:
    """Feature maps per stride, each shaped ``(B, H/stride, W/stride, D_f)``."""
    levels: list[tuple[int, Tensor]]
    feature_dim: int

    @property
    def strides(self) -> list[int]:
        return [s for s, _ in self.levels]

    def level(self, stride: int) -> Tensor:
        for s, fmap in self.levels:
            if s == stride:
                return fmap
        raise ShapeError(f"pyramid has no level with stride {stride} (have {self.strides})")

    def frames(self, start: int, stop: int) -> "FeaturePyramid":
        return FeaturePyramid([(s, m[start:stop]) for s, m in self.levels], self.feature_dim)

    def to_dict(self):
        return {"feature_dim": self.feature_dim,
                "levels": [{"stride": s, "shape": list(m.shape)} for s, m in self.levels]}


class ResidualBlock(Module):
    def __init__(self, dim: int, rng: np.random.Generator, activation: str):
        self.conv1 = Conv2d(dim, dim, 3, rng, padding=1)
        self.conv2 = Conv2d(dim, dim, 3, rng, padding=1)
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        y = self.conv2(activate(self.conv1(x), self.activation))
        return activate(x + y, self.activation)


class Encoder(Module):
    """Residual conv backbone producing one feature map per stride."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        self.config = config
        D = config.feature_dim
        self.stem = Conv2d(3, D, 3, rng, stride=2, padding=1)
        self.blocks = [ResidualBlock(D, rng, config.activation)
                       for _ in range(config.n_residual_blocks)]
        self.downsample = [Conv2d(D, D, 3, rng, stride=2, padding=1)
                           for _ in config.strides[1:]]

    def check_frame_size(self, H: int, W: int) -> None:
        largest = self.config.strides[-1]
        if H % largest or W % largest:
            raise ShapeError(f"frame height {H} and width {W} must be divisible by the largest "
                             f"pyramid stride {largest}")

    def forward(self, frames) -> FeaturePyramid:
        """Encode ``(B, H, W, 3)`` frames."""
        x = as_tensor(frames)
        if x.ndim != 4 or x.shape[-1] != 3:
            raise ShapeError(f"encoder expects (B, H, W, 3) frames, got {x.shape}")
        self.check_frame_size(x.shape[1], x.shape[2])
        x = activate(self.stem(x), self.config.activation)
        for block in self.blocks:
            x = block(x)
        levels = [(self.config.strides[0], x)]
        for stride, conv in zip(self.config.strides[1:], self.downsample):
            x = activate(conv(x), self.config.activation)
            levels.append((stride, x))
        return FeaturePyramid(levels, self.config.feature_dim)


def extract_pyramid(frame, encoder: Encoder) -> FeaturePyramid:
    """Pyramid of a single ``(H, W, 3)`` frame; levels keep a batch axis of one."""
    frame = as_tensor(frame)
    return encoder(frame.reshape(1, *frame.shape))
