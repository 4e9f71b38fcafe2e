"""Upsampler defaults and variant names."""

DEFAULT_KERNEL = 3
DEFAULT_BLOCKS = 2
UPSAMPLER_VARIANTS = ("attention", "attention_no_alibi", "convex", "bilinear", "nearest")
LEARNED_VARIANTS = ("attention", "attention_no_alibi", "convex")
ATTENTION_VARIANTS = ("attention", "attention_no_alibi")
WEIGHT_SUM_TOLERANCE = 1e-6
