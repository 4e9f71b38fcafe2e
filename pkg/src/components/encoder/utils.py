"""Encoder defaults."""

DEFAULT_STRIDES = (2, 4, 8)
DEFAULT_FEATURE_DIM = 32
DEFAULT_RESIDUAL_BLOCKS = 2
DEFAULT_CORRELATION_RADIUS = 3

DEPTH_REPRS = ("log", "linear", "inverse")
MIN_SAMPLED_DEPTH = 0.0
