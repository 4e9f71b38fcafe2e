"""Evaluation constants."""

# Fractions of the median ground-truth depth.
DEFAULT_THRESHOLDS = (0.01, 0.02, 0.04, 0.08, 0.16)
REPORT_FILE = "eval.json"
