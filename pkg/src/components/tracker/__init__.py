from src.components.tracker.config import ModelConfig, TrackerConfig
from src.components.tracker.layout import (
    AttentionLayout, anchor_queries, chunk_layout, dense_layout, grid_cells, grid_patches,
    grid_queries, patch_layout, sparse_layout,
)
from src.components.tracker.attention import SpatialAttention, TemporalAttention, TransformerBlock
from src.components.tracker.tokens import TokenBuilder, TokenTensor
from src.components.tracker.transformer import UpdateTransformer
from src.components.tracker.cost import (
    CostEntry, CostReport, attention_cost, cost_sweep, fit_residual, measure_cost, predicted_cost,
)
from src.components.tracker.model import (
    IterationOutput, Tracker, WindowOutput, create_tracker, update_log_depth,
)
from src.components.tracker.video import (
    DenseResult, run_windows, track_dense, track_video, window_starts,
)
from src.components.tracker.checkpoint import load_checkpoint, load_model_config, save_checkpoint

__all__ = [
    "ModelConfig", "TrackerConfig",
    "AttentionLayout", "anchor_queries", "chunk_layout", "dense_layout", "grid_cells",
    "grid_patches", "grid_queries", "patch_layout", "sparse_layout",
    "SpatialAttention", "TemporalAttention", "TransformerBlock",
    "TokenBuilder", "TokenTensor", "UpdateTransformer",
    "CostEntry", "CostReport", "attention_cost", "cost_sweep", "fit_residual", "measure_cost",
    "predicted_cost",
    "IterationOutput", "Tracker", "WindowOutput", "create_tracker", "update_log_depth",
    "DenseResult", "run_windows", "track_dense", "track_video", "window_starts",
    "load_checkpoint", "load_model_config", "save_checkpoint",
]
