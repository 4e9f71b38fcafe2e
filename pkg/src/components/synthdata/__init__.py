from src.components.synthdata.scene import (
    RgbdSequence, SceneConfig, SpriteSpec, anchor_frames, generate_sequence,
)
from src.components.synthdata.container import (
    SequenceCollection, generate_split, list_split, load_dataset, read_container,
    save_dataset, write_container, write_index,
)
from src.components.synthdata.baselines import zero_motion_baseline, zero_motion_depth_baseline

__all__ = [
    "RgbdSequence", "SceneConfig", "SpriteSpec", "anchor_frames", "generate_sequence",
    "SequenceCollection", "generate_split", "list_split", "load_dataset", "read_container",
    "save_dataset", "write_container", "write_index",
    "zero_motion_baseline", "zero_motion_depth_baseline",
]
