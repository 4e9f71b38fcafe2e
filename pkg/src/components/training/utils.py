"""Training defaults and file names."""

LAMBDA_2D = 100.0
LAMBDA_DEPTH = 1.0
LAMBDA_VISIB = 0.1

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
DESK_LR = 3e-4

METRICS_FILE = "metrics.jsonl"
CHECKPOINT_DIR = "checkpoint"

LOSS_COMPONENTS = ("total", "coarse_2d", "coarse_depth", "visib",
                   "fine_2d", "fine_depth", "fine_visib")
