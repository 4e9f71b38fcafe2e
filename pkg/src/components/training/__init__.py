from src.components.training.loss import (
    LossBreakdown, LossWeights, TrackPrediction, TrackTargets, compute_loss, inverse_depth_loss,
    position_loss, visibility_loss,
)
from src.components.training.optim import Adam, clip_grad_norm, grad_norm, learning_rate
from src.components.training.trainer import (
    PatchSample, TrainConfig, TrainResult, Trainer, augment, patch_loss, read_metrics,
    sample_patch, train, upsample_patch,
)

__all__ = [
    "LossBreakdown", "LossWeights", "TrackPrediction", "TrackTargets", "compute_loss",
    "inverse_depth_loss", "position_loss", "visibility_loss",
    "Adam", "clip_grad_norm", "grad_norm", "learning_rate",
    "PatchSample", "TrainConfig", "TrainResult", "Trainer", "augment", "patch_loss",
    "read_metrics", "sample_patch", "train", "upsample_patch",
]
