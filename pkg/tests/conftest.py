"""
Shared fixtures for the track3d test suite.
"""
import numpy as np
import pytest

from src.components.encoder import EncoderConfig
from src.components.numerics import set_default_dtype
from src.components.tracker import ModelConfig, Tracker, TrackerConfig
from src.components.upsampler import UpsamplerConfig


# ---------------------------------------------------------------------------
# Global numeric settings
# ---------------------------------------------------------------------------

@pytest.fixture(autouse=True)
def float64_default():
    set_default_dtype(np.float64)
    yield
    set_default_dtype(np.float64)


# ---------------------------------------------------------------------------
# Helpers & Fixtures
# ---------------------------------------------------------------------------

def micro_config(**tracker_overrides) -> ModelConfig:
    """Smallest model that still exercises every layer on 8x8 frames."""
    tracker = dict(stride=2, hidden_dim=8, n_heads=2, n_blocks=1, n_iterations=1, mlp_ratio=2,
                   window=3, n_virtual=2, anchor_grid=(1, 1), patch_size=2, n_frequencies=2)
    tracker.update(tracker_overrides)
    return ModelConfig(
        encoder=EncoderConfig(feature_dim=4, n_residual_blocks=1, correlation_radius=1,
                              activation="gelu"),
        tracker=TrackerConfig(**tracker),
        upsampler=UpsamplerConfig(feature_dim=4, n_heads=1, n_blocks=1),
    )


def micro_video(T: int = 3, H: int = 8, W: int = 8, seed: int = 0):
    rng = np.random.default_rng(seed)
    rgb = rng.uniform(0.0, 1.0, size=(T, H, W, 3))
    depth = rng.uniform(1.0, 3.0, size=(T, H, W))
    return rgb, depth


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return micro_config()


@pytest.fixture
def tiny_model(tiny_config):
    return Tracker(tiny_config, np.random.default_rng(0))


@pytest.fixture
def tiny_video():
    return micro_video()
