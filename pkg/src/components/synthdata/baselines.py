from __future__ import annotations

import numpy as np

from src.components.errors import MissingGroundTruthError
from src.components.synthdata.scene import RgbdSequence


def _require_tracks(seq: RgbdSequence) -> np.ndarray:
    if seq.gt_tracks is None:
        raise MissingGroundTruthError(f"sequence '{seq.name or seq.seed}' has no gt_tracks")
    return seq.gt_tracks


def zero_motion_baseline(seq: RgbdSequence) -> float:
    """Mean 2D endpoint error of predicting every point stays where it started."""
    tracks = _require_tracks(seq)
    if tracks.shape[0] < 2:
        return 0.0
    disp = tracks[1:, ..., :2] - tracks[:1, ..., :2]
    return float(np.sqrt((disp ** 2).sum(-1)).mean())


def zero_motion_depth_baseline(seq: RgbdSequence) -> float:
    tracks = _require_tracks(seq)
    if tracks.shape[0] < 2:
        return 0.0
    return float(np.abs(np.log(tracks[1:, ..., 2]) - np.log(tracks[:1, ..., 2])).mean())
