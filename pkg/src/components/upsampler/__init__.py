from src.components.upsampler.upsampler import (
    Upsampler, UpsamplerConfig, UpsampleWeightMap, bilinear_weights, create_upsampler,
    nearest_weights, neighborhood,
)
from src.components.upsampler.apply import apply_upsample, fine_queries, upsample_values

__all__ = [
    "Upsampler", "UpsamplerConfig", "UpsampleWeightMap", "create_upsampler",
    "bilinear_weights", "nearest_weights", "neighborhood",
    "apply_upsample", "fine_queries", "upsample_values",
]
