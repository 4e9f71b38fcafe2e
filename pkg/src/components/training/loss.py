from __future__ import annotations
from dataclasses import dataclass as std_dataclass
from typing import Optional, Sequence

import numpy as np
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from src.components.errors import NonFiniteError, ShapeError
from src.components.numerics import Tensor, as_tensor, exp, softplus
from src.components.training.utils import LAMBDA_2D, LAMBDA_DEPTH, LAMBDA_VISIB, LOSS_COMPONENTS


@dataclass(config=ConfigDict(extra="forbid"))
class LossWeights:
    lambda_2d: float = LAMBDA_2D
    lambda_depth: float = LAMBDA_DEPTH
    lambda_visib: float = LAMBDA_VISIB
    per_iteration_weights: Optional[list[float]] = None  # None means uniform
    supervise_occluded: bool = True

    def __post_init__(self):
        if min(self.lambda_2d, self.lambda_depth, self.lambda_visib) < 0:
            raise ValueError("loss weights must be non-negative")
        w = self.per_iteration_weights
        if w is not None:
            if not w or any(x < 0 for x in w):
                raise ValueError("per_iteration_weights must be non-empty and non-negative")
            if abs(sum(w) - 1.0) > 1e-9:
                raise ValueError(f"per_iteration_weights must sum to 1, got {sum(w)}")

    def iteration_weights(self, n_iterations: int) -> list[float]:
        if self.per_iteration_weights is None:
            return [1.0 / n_iterations] * n_iterations
        if len(self.per_iteration_weights) != n_iterations:
            raise ShapeError(f"{len(self.per_iteration_weights)} iteration weights for "
                             f"{n_iterations} iterations")
        return list(self.per_iteration_weights)


@std_dataclass
class TrackPrediction:
    """Differentiable (uv, log depth, visibility logit) of one output."""
    uv: Tensor          # (T, N, 2)
    log_d: Tensor       # (T, N, 1)
    vis_logit: Optional[Tensor] = None


@std_dataclass
class TrackTargets:
    tracks: np.ndarray      # (T, N, 3) as (u, v, d)
    visibility: np.ndarray  # (T, N)

    def __post_init__(self):
        self.tracks = np.asarray(self.tracks, dtype=np.float64)
        self.visibility = np.asarray(self.visibility, dtype=bool)
        if self.tracks.ndim != 3 or self.tracks.shape[-1] != 3:
            raise ShapeError(f"targets must be (T, N, 3), got {self.tracks.shape}")
        if self.visibility.shape != self.tracks.shape[:2]:
            raise ShapeError(f"visibility {self.visibility.shape} for tracks {self.tracks.shape}")
        if not np.all(np.isfinite(self.tracks)) or np.any(self.tracks[..., 2] <= 0):
            raise ShapeError("targets must be finite with positive depth")


@std_dataclass
class LossBreakdown:
    total: Tensor
    components: dict[str, float]

    def to_dict(self):
        return dict(self.components)


# ---------------------------------------------------------------------------
# Loss terms
# ---------------------------------------------------------------------------

def _masked_mean(values: Tensor, mask: Optional[np.ndarray]) -> Tensor:
    if mask is None:
        return values.mean()
    count = max(int(mask.sum()), 1)
    return (values * mask).sum() / float(count)


def _check_shapes(pred: TrackPrediction, targets: TrackTargets) -> None:
    T, N = targets.tracks.shape[:2]
    if pred.uv.shape != (T, N, 2) or pred.log_d.shape != (T, N, 1):
        raise ShapeError(f"prediction uv {pred.uv.shape} / log_d {pred.log_d.shape} does not "
                         f"match targets {targets.tracks.shape}")


def position_loss(pred: TrackPrediction, targets: TrackTargets,
                  supervise_occluded: bool = True) -> Tensor:
    """Mean over points of ``|du| + |dv|``."""
    _check_shapes(pred, targets)
    err = (pred.uv - targets.tracks[..., :2]).abs().sum(axis=-1)
    return _masked_mean(err, None if supervise_occluded else targets.visibility.astype(np.float64))


def inverse_depth_loss(pred: TrackPrediction, targets: TrackTargets,
                       supervise_occluded: bool = True) -> Tensor:
    """Mean L1 between predicted and true inverse depth."""
    _check_shapes(pred, targets)
    err = (exp(-pred.log_d) - 1.0 / targets.tracks[..., 2:3]).abs().sum(axis=-1)
    return _masked_mean(err, None if supervise_occluded else targets.visibility.astype(np.float64))


def visibility_loss(vis_logit: Tensor, visibility: np.ndarray) -> Tensor:
    """Binary cross-entropy on logits, ``softplus(x) - y * x``."""
    vis_logit = as_tensor(vis_logit)
    y = np.asarray(visibility, dtype=np.float64)[..., None]
    if vis_logit.shape != y.shape:
        raise ShapeError(f"visibility logits {vis_logit.shape} for targets {y.shape}")
    return (softplus(vis_logit) - vis_logit * y).mean()


def _finite(name: str, value: Tensor) -> float:
    v = float(value.data)
    if not np.isfinite(v):
        raise NonFiniteError(f"loss component '{name}' is not finite", name)
    return v


def compute_loss(iterations: Sequence[TrackPrediction], targets: TrackTargets,
                 weights: Optional[LossWeights] = None,
                 fine: Optional[TrackPrediction] = None,
                 fine_targets: Optional[TrackTargets] = None) -> LossBreakdown:
    """Weighted sum of the coarse per-iteration losses and the upsampled-output loss.

    Visibility is supervised on the final iteration and on the fine output.
    Components are reported already multiplied by their weights, so they
    add up to ``total``.
    """
    weights = weights or LossWeights()
    if not iterations:
        raise ValueError("compute_loss needs at least one iteration")
    final = iterations[-1]
    if final.vis_logit is None:
        raise ShapeError("the final iteration carries no visibility logits")
    if (fine is None) != (fine_targets is None):
        raise ValueError("fine predictions and fine targets must be given together")
    occ = weights.supervise_occluded

    coarse_2d: Tensor = Tensor(0.0)
    coarse_depth: Tensor = Tensor(0.0)
    for w, pred in zip(weights.iteration_weights(len(iterations)), iterations):
        coarse_2d = coarse_2d + position_loss(pred, targets, occ) * (w * weights.lambda_2d)
        coarse_depth = coarse_depth + inverse_depth_loss(pred, targets, occ) * (w * weights.lambda_depth)
    visib = visibility_loss(final.vis_logit, targets.visibility) * weights.lambda_visib
    terms = {"coarse_2d": coarse_2d, "coarse_depth": coarse_depth, "visib": visib}

    if fine is not None:
        terms["fine_2d"] = position_loss(fine, fine_targets, occ) * weights.lambda_2d
        terms["fine_depth"] = inverse_depth_loss(fine, fine_targets, occ) * weights.lambda_depth
        if fine.vis_logit is not None:
            terms["fine_visib"] = visibility_loss(fine.vis_logit, fine_targets.visibility) \
                * weights.lambda_visib

    components = {name: _finite(name, value) for name, value in terms.items()}
    total = Tensor(0.0)
    for name in LOSS_COMPONENTS[1:]:
        if name in terms:
            total = total + terms[name]
    components = {"total": _finite("total", total), **components}
    for name in LOSS_COMPONENTS:
        components.setdefault(name, 0.0)
    return LossBreakdown(total, {name: components[name] for name in LOSS_COMPONENTS})
