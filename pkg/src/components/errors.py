from __future__ import annotations
from pathlib import Path
from typing import Optional


class Track3DError(Exception):
    """Base class for every failure raised by the tracking pipeline."""


class ShapeError(Track3DError, ValueError):
    pass


class ConfigError(Track3DError, ValueError):
    pass


class InvalidQueryError(Track3DError, ValueError):
    pass


class MissingGroundTruthError(Track3DError, ValueError):
    pass


class DatasetFormatError(Track3DError, ValueError):
    def __init__(self, path: Path | str, message: str):
        self.path = Path(path)
        super().__init__(f"{self.path}: {message}")


class NonFiniteError(Track3DError, RuntimeError):
    def __init__(self, message: str, component: Optional[str] = None):
        self.component = component
        super().__init__(message)


class TrainingDivergedError(NonFiniteError):
    def __init__(self, step: int, component: str, checkpoint: Optional[Path]):
        self.step = step
        self.checkpoint = checkpoint
        where = f"; last good checkpoint at {checkpoint}" if checkpoint else ""
        super().__init__(f"loss diverged at step {step} ({component} is not finite){where}",
                         component)


class CostCounterOverflow(Track3DError, OverflowError):
    pass


class InvalidDepthError(Track3DError, ValueError):
    pass
