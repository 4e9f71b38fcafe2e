from __future__ import annotations
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.components.encoder import Encoder, FeaturePyramid, extract_pyramid
from src.components.errors import NonFiniteError, ShapeError
from src.components.numerics import (
    AttentionCounter, Module, Tensor, clip_min, exp, log, no_grad,
)
from src.components.track_state import TrackState, init_tracks
from src.components.tracker.config import ModelConfig
from src.components.tracker.layout import AttentionLayout
from src.components.tracker.tokens import TokenBuilder
from src.components.tracker.transformer import UpdateTransformer
from src.components.tracker.utils import MIN_LINEAR_DEPTH
from src.components.upsampler import UpsampleWeightMap, Upsampler


@dataclass
class IterationOutput:
    uv: Tensor
    log_d: Tensor
    track_feat: Tensor
    vis_logit: Optional[Tensor] = None  # final iteration only


@dataclass
class WindowOutput:
    iterations: list[IterationOutput]
    hidden: Tensor  # (T, N, hidden) of the final iteration
    vis_logit: Tensor

    @property
    def final(self) -> IterationOutput:
        return self.iterations[-1]

    def to_state(self, template: TrackState) -> TrackState:
        last = self.final
        return TrackState(uv=last.uv.data.copy(), log_d=last.log_d.data.copy(),
                          vis_logit=self.vis_logit.data.copy(),
                          track_feat=last.track_feat.data.copy(),
                          query_uv=template.query_uv.copy(),
                          query_log_d=template.query_log_d.copy(), meta=dict(template.meta))


def _check_finite(t: Tensor, iteration: int, head: str) -> None:
    if not np.all(np.isfinite(t.data)):
        raise NonFiniteError(f"iteration {iteration}: non-finite output from the {head} head",
                             f"{head} head")


def update_log_depth(log_d: Tensor, delta: Tensor, mask: np.ndarray, depth_repr: str) -> Tensor:
    """Applies a depth update in ``depth_repr`` and returns log depth.

    ``mask`` is zero on frames that must not move; there the result equals
    ``log_d`` exactly.
    """
    if depth_repr == "log":
        return log_d + delta * mask
    if depth_repr == "linear":
        target = log(clip_min(exp(log_d) + delta, MIN_LINEAR_DEPTH))
    else:
        target = -log(clip_min(exp(-log_d) + delta, MIN_LINEAR_DEPTH))
    return log_d + (target - log_d) * mask


class Tracker(Module):
    """Encoder, token builder, update transformer and dense upsampler."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        enc, trk = config.encoder, config.tracker
        self.encoder = Encoder(enc, rng)
        self.token_builder = TokenBuilder(enc, trk, rng)
        self.transformer = UpdateTransformer(self.token_builder.width, enc.feature_dim, trk, rng)
        self.upsampler = Upsampler(config.upsampler, trk.hidden_dim, trk.stride, rng)

    @property
    def stride(self) -> int:
        return self.config.tracker.stride

    def init_state(self, frame0_rgb, frame0_depth, queries: np.ndarray, T: int) -> TrackState:
        """Query tracks replicated over ``T`` frames with frame-0 features."""
        with no_grad():
            fmap = extract_pyramid(frame0_rgb, self.encoder).level(self.stride)
        return init_tracks(queries, frame0_depth, T, fmap, self.stride,
                           visibility_logit=self.config.tracker.visibility_init_logit)

    def forward_window(self, frames, depths: np.ndarray, state: TrackState,
                       layout: AttentionLayout, counter: Optional[AttentionCounter] = None,
                       pyramid: Optional[FeaturePyramid] = None,
                       n_iterations: Optional[int] = None) -> WindowOutput:
        """Iteratively refines one window; frame 0 of the window stays fixed.

        Coordinates are detached between iterations while track features
        keep their gradient path.
        """
        cfg = self.config.tracker
        depths = np.asarray(depths, dtype=np.float64)
        T, N = state.T, state.N
        if depths.shape[0] != T:
            raise ShapeError(f"window has {depths.shape[0]} frames but the state has {T}")
        if T < 2:
            raise ShapeError("a window needs at least 2 frames")
        if layout.n_tracks != N:
            raise ShapeError(f"layout covers {layout.n_tracks} tracks, state has {N}")
        if pyramid is None:
            pyramid = self.encoder(frames)

        mask = np.ones((T, 1, 1))
        mask[0] = 0.0
        uv, log_d = Tensor(state.uv), Tensor(state.log_d)
        feat = Tensor(state.track_feat)
        iterations: list[IterationOutput] = []
        steps = n_iterations or cfg.n_iterations
        hidden = None
        for it in range(steps):
            tokens = self.token_builder(uv.data, log_d.data, state.vis_logit, feat, pyramid, depths)
            hidden = self.transformer(tokens.tokens, layout, counter)
            d_uv = self.transformer.uv_head(hidden)
            d_depth = self.transformer.depth_head(hidden)
            d_feat = self.transformer.feature_head(hidden)
            for name, out in (("uv", d_uv), ("depth", d_depth), ("feature", d_feat)):
                _check_finite(out, it, name)
            uv = uv.detach() + d_uv * mask
            log_d = update_log_depth(log_d.detach(), d_depth, mask, cfg.depth_repr)
            feat = feat + d_feat * mask
            iterations.append(IterationOutput(uv, log_d, feat))

        vis_head = self.transformer.visibility_head(hidden)
        _check_finite(vis_head, steps - 1, "visibility")
        vis_logit = Tensor(state.vis_logit) * (1.0 - mask) + vis_head * mask
        iterations[-1].vis_logit = vis_logit
        return WindowOutput(iterations, hidden, vis_logit)

    def refine_window(self, frames, depths: np.ndarray, state: TrackState,
                      layout: AttentionLayout, counter: Optional[AttentionCounter] = None) -> TrackState:
        with no_grad():
            return self.forward_window(frames, depths, state, layout, counter).to_state(state)

    def upsample_weights(self, frame0, hidden0: Tensor, grid: tuple[int, int]) -> UpsampleWeightMap:
        """Weight map from the first frame of a window and its coarse hidden states."""
        h, w = grid
        if hidden0.shape[0] != h * w:
            raise ShapeError(f"{hidden0.shape[0]} coarse tracks do not form a {h}x{w} grid")
        return self.upsampler.compute_weights(frame0, hidden0.reshape(h, w, hidden0.shape[-1]))


def create_tracker(config: Optional[ModelConfig] = None, seed: int = 0) -> Tracker:
    return Tracker(config or ModelConfig(), np.random.default_rng(seed))
