"""Tracker constants and attention variant names."""

from src.components.track_state import VISIBLE_LOGIT

MIN_LINEAR_DEPTH = 1e-6

ATTENTION_VARIANTS = ("none", "cotracker", "ours_global", "ours_global_local", "full")
VIRTUAL_VARIANTS = ("cotracker", "ours_global", "ours_global_local")
LOCAL_VARIANTS = ("ours_global_local",)
ANCHOR_VARIANTS = ("ours_global", "ours_global_local")

# Counter tags used by the attention layers.
TAG_LOCAL = "local"
TAG_VIRTUAL_FROM_TRACKS = "virtual_from_tracks"
TAG_VIRTUAL_SELF = "virtual_self"
TAG_TRACKS_FROM_VIRTUAL = "tracks_from_virtual"
TAG_FULL = "full"
TAG_TEMPORAL_TRACKS = "temporal_tracks"
TAG_TEMPORAL_VIRTUAL = "temporal_virtual"

SPATIAL_TAGS = (TAG_LOCAL, TAG_VIRTUAL_FROM_TRACKS, TAG_VIRTUAL_SELF, TAG_TRACKS_FROM_VIRTUAL,
                TAG_FULL, TAG_TEMPORAL_VIRTUAL)

CHECKPOINT_CONFIG = "model.json"
CHECKPOINT_WEIGHTS = "weights"
