from src.components.metrics.metrics import (
    EndpointError, EvalReport, MetricsConfig, Tapvid3dResult, average_reports, endpoint_error,
    lift_to_camera, occlusion_iou, tapvid3d_metrics, threshold_scale,
)
from src.components.metrics.evaluate import evaluate, ground_truth_for, state_from_ground_truth

__all__ = [
    "EndpointError", "EvalReport", "MetricsConfig", "Tapvid3dResult", "average_reports",
    "endpoint_error", "lift_to_camera", "occlusion_iou", "tapvid3d_metrics", "threshold_scale",
    "evaluate", "ground_truth_for", "state_from_ground_truth",
]
