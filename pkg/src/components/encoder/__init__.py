from src.components.encoder.backbone import EncoderConfig, Encoder, FeaturePyramid, extract_pyramid
from src.components.encoder.correlation import correlation_features, depth_correlation, tap_offsets

__all__ = [
    "EncoderConfig", "Encoder", "FeaturePyramid", "extract_pyramid",
    "correlation_features", "depth_correlation", "tap_offsets",
]
