"""Constants for synthetic scene generation and the dataset container."""

CONTAINER_FORMAT = "track3d-sequence"
TRACKS_FORMAT = "track3d-tracks"
CONTAINER_VERSION = 1
META_FILE = "meta.json"
INDEX_FILE = "dataset.json"

SEQUENCE_TENSORS = ("rgb", "depth", "gt_tracks", "gt_visibility")

# Sprites are sampled in the nearer part of the range; the background plane
# never comes closer than this fraction of the far plane.
SPRITE_DEPTH_FRACTION = 0.75
BACKGROUND_MIN_FRACTION = 0.85

BACKGROUND_LATTICE = 16
MIN_NOISE_DEPTH = 1e-3

# Seed-stream tags so noise and scene sampling never share draws.
NOISE_STREAM = 1
ANCHOR_NAMES = ("first", "middle", "last")
