from __future__ import annotations
import json
from dataclasses import asdict, dataclass as std_dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass
from tqdm import tqdm

from src.components.errors import ConfigError, NonFiniteError, TrainingDivergedError
from src.components.metrics import evaluate
from src.components.numerics import concat
from src.components.run_logger import RunLogger
from src.components.synthdata import RgbdSequence
from src.components.track_state import TrackState
from src.components.tracker import (
    AttentionLayout, Tracker, WindowOutput, anchor_queries, grid_queries, patch_layout,
    save_checkpoint, track_dense,
)
from src.components.tracker.utils import ANCHOR_VARIANTS
from src.components.training.loss import (
    LossBreakdown, LossWeights, TrackPrediction, TrackTargets, compute_loss,
)
from src.components.training.optim import Adam, Schedule, clip_grad_norm, learning_rate
from src.components.training.utils import CHECKPOINT_DIR, DESK_LR, METRICS_FILE
from src.components.upsampler import fine_queries, upsample_values


@dataclass(config=ConfigDict(extra="forbid"))
class TrainConfig:
    steps: int = 2000
    lr: float = DESK_LR
    schedule: Schedule = "warmup_constant"
    warmup_steps: int = 100
    max_grad_norm: Optional[float] = 1.0
    patch: tuple[int, int] = (8, 10)   # coarse tracks, rows x cols
    use_anchors: bool = True
    upsample: bool = True               # supervise the upsampled output too
    flip_prob: float = 0.5
    brightness_jitter: float = 0.1
    depth_noise_std: float = 0.0
    val_every: int = 200
    val_sequences: int = 4
    checkpoint_every: int = 500
    log_every: int = 50
    loss: LossWeights = field(default_factory=LossWeights)
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0 or self.warmup_steps < 0:
            raise ValueError("steps and warmup_steps must be >= 0")
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if min(self.patch) < 1:
            raise ValueError(f"patch must be at least 1x1, got {self.patch}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if self.brightness_jitter < 0 or self.depth_noise_std < 0:
            raise ValueError("augmentation strengths must be >= 0")
        if self.max_grad_norm is not None and self.max_grad_norm <= 0:
            raise ValueError("max_grad_norm must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@std_dataclass
class PatchSample:
    """One training example: a window, its query tracks and their targets."""
    rgb: np.ndarray
    depth: np.ndarray
    queries: np.ndarray          # patch queries followed by appended anchors
    n_patch: int
    origin: tuple[int, int]      # top-left coarse cell of the patch
    patch: tuple[int, int]
    layout: AttentionLayout
    targets: TrackTargets
    fine_targets: Optional[TrackTargets] = None
    sequence: str = ""


@std_dataclass
class TrainResult:
    checkpoint: Path
    metrics_path: Optional[Path]
    steps: int
    records: list[dict] = field(default_factory=list)

    @property
    def final(self) -> dict:
        return self.records[-1] if self.records else {}

    def to_dict(self):
        return {"checkpoint": str(self.checkpoint), "metrics": str(self.metrics_path),
                "steps": self.steps, "final": self.final}


# ---------------------------------------------------------------------------
# Sampling and augmentation
# ---------------------------------------------------------------------------

def augment(seq: RgbdSequence, S: int, config: TrainConfig,
            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """First ``S`` frames of a sequence after flip, brightness jitter and depth noise.

    Ground truth is flipped with the frames; noise touches input depth only.
    """
    rgb = seq.rgb[:S].astype(np.float64)
    depth = seq.depth[:S].astype(np.float64)
    tracks = seq.gt_tracks[:S].astype(np.float64)
    vis = seq.gt_visibility[:S].astype(bool)
    if rng.uniform() < config.flip_prob:
        rgb, depth = rgb[:, :, ::-1], depth[:, :, ::-1]
        tracks, vis = tracks[:, :, ::-1].copy(), vis[:, :, ::-1]
        tracks[..., 0] = seq.W - 1 - tracks[..., 0]
    if config.brightness_jitter > 0:
        gain = 1.0 + rng.uniform(-config.brightness_jitter, config.brightness_jitter)
        rgb = np.clip(rgb * gain, 0.0, 1.0)
    if config.depth_noise_std > 0:
        depth = depth * np.exp(rng.normal(0.0, config.depth_noise_std, size=depth.shape))
    return (np.ascontiguousarray(rgb), np.ascontiguousarray(depth),
            np.ascontiguousarray(tracks), np.ascontiguousarray(vis))


def sample_patch(model: Tracker, seq: RgbdSequence, config: TrainConfig,
                 rng: np.random.Generator) -> PatchSample:
    """Random coarse patch of a sequence's first window, plus anchor tracks.

    Anchors only extend the token set; targets cover the patch tracks.
    """
    cfg = model.config.tracker
    S, r = cfg.window, model.stride
    if not seq.has_ground_truth:
        raise ConfigError(f"training sequence '{seq.name}' has no ground truth")
    if seq.T < S:
        raise ConfigError(f"sequence '{seq.name}' has {seq.T} frames, window needs {S}")
    h, w = seq.H // r, seq.W // r
    ph, pw = config.patch
    if ph > h or pw > w:
        raise ConfigError(f"patch {ph}x{pw} does not fit the {h}x{w} coarse grid")

    rgb, depth, tracks, vis = augment(seq, S, config, rng)
    py, px = int(rng.integers(0, h - ph + 1)), int(rng.integers(0, w - pw + 1))
    queries = grid_queries(ph, pw, r, origin=(py, px))
    cols, rows = queries[:, 0].astype(np.int64), queries[:, 1].astype(np.int64)
    targets = TrackTargets(tracks[:, rows, cols], vis[:, rows, cols])

    use_anchors = config.use_anchors and cfg.attention_variant in ANCHOR_VARIANTS
    layout = patch_layout(ph, pw, cfg, use_anchors=use_anchors)
    if use_anchors:
        queries = np.concatenate([queries, anchor_queries(seq.H, seq.W, cfg)], axis=0)

    fine_targets = None
    if config.upsample:
        ys, xs = slice(py * r, (py + ph) * r), slice(px * r, (px + pw) * r)
        fine_targets = TrackTargets(tracks[:, ys, xs].reshape(S, -1, 3),
                                    vis[:, ys, xs].reshape(S, -1))
    return PatchSample(rgb, depth, queries, ph * pw, (py, px), (ph, pw), layout, targets,
                       fine_targets, seq.name)


def upsample_patch(model: Tracker, sample: PatchSample, state: TrackState,
                   out: WindowOutput) -> TrackPrediction:
    """Differentiable per-pixel prediction over the patch region.

    Motion relative to the coarse queries is averaged and added to the
    per-pixel queries, matching dense inference.
    """
    r, n = model.stride, sample.n_patch
    (py, px), (ph, pw) = sample.origin, sample.patch
    ys, xs = slice(py * r, (py + ph) * r), slice(px * r, (px + pw) * r)
    wmap = model.upsample_weights(sample.rgb[0, ys, xs], out.hidden[0, :n], (ph, pw))
    last = out.final
    values = concat([last.uv[:, :n] - state.query_uv[:n], last.log_d[:, :n] - state.query_log_d[:n],
                     out.vis_logit[:, :n]], axis=-1)
    fine = upsample_values(values, wmap)
    query_uv, query_log_d = fine_queries(sample.depth[0, ys, xs])
    query_uv = query_uv + np.array([px * r, py * r], dtype=np.float64)
    return TrackPrediction(uv=fine[..., 0:2] + query_uv[None], log_d=fine[..., 2:3] + query_log_d[None],
                           vis_logit=fine[..., 3:4])


def patch_loss(model: Tracker, sample: PatchSample, weights: LossWeights) -> LossBreakdown:
    """Forward one window on the sample with gradients, then compute the loss."""
    pyramid = model.encoder(sample.rgb)
    state = model.init_state(sample.rgb[0], sample.depth[0], sample.queries, sample.rgb.shape[0])
    out = model.forward_window(sample.rgb, sample.depth, state, sample.layout, pyramid=pyramid)
    n = sample.n_patch
    iterations = [TrackPrediction(it.uv[:, :n], it.log_d[:, :n]) for it in out.iterations]
    iterations[-1].vis_logit = out.vis_logit[:, :n]
    fine = upsample_patch(model, sample, state, out) if sample.fine_targets is not None else None
    return compute_loss(iterations, sample.targets, weights, fine, sample.fine_targets)


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------

class Trainer:
    """Patchwise training loop writing ``metrics.jsonl`` and checkpoints."""

    def __init__(self, model: Tracker, config: TrainConfig, train_set: Sequence[RgbdSequence],
                 val_set: Optional[Sequence[RgbdSequence]] = None,
                 output_dir: Optional[Path] = None, logger: Optional[RunLogger] = None,
                 progress: bool = True):
        if len(train_set) == 0:
            raise ConfigError("training set is empty")
        self.model = model
        self.config = config
        self.train_set = train_set
        self.val_set = val_set
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.logger = logger
        self.progress = progress
        self.rng = np.random.default_rng(config.seed)
        self.params = model.parameters()
        self.optimizer = Adam(self.params)
        self.records: list[dict] = []
        self.last_checkpoint: Optional[Path] = None

    @property
    def checkpoint_path(self) -> Optional[Path]:
        return self.output_dir / CHECKPOINT_DIR if self.output_dir is not None else None

    def _log(self, event: str, data: dict) -> None:
        if self.logger is not None:
            self.logger.log_event(event, data)

    def save(self, step: int) -> Optional[Path]:
        if self.output_dir is None:
            return None
        path = save_checkpoint(self.model, self.checkpoint_path,
                               {"step": step, "train": self.config.to_dict()})
        self.last_checkpoint = path
        self._log("checkpoint_saved", {"step": step, "path": str(path)})
        return path

    def validate(self) -> Optional[float]:
        """Mean dense 2D EPE over the first ``val_sequences`` held-out sequences."""
        if not self.val_set:
            return None
        errors = []
        n = min(self.config.val_sequences, len(self.val_set))
        for i in range(n):
            seq = self.val_set[i]
            result = track_dense(self.model, seq.rgb, seq.depth, upsample=self.config.upsample)
            pred = result.fine if result.fine is not None else result.coarse
            report = evaluate(pred, seq)
            if report.epe_all is not None:
                errors.append(report.epe_all)
        return float(np.mean(errors)) if errors else None

    def train_step(self, step: int) -> dict:
        cfg = self.config
        seq = self.train_set[int(self.rng.integers(len(self.train_set)))]
        sample = sample_patch(self.model, seq, cfg, self.rng)
        self.optimizer.zero_grad()
        try:
            loss = patch_loss(self.model, sample, cfg.loss)
        except NonFiniteError as e:
            raise TrainingDivergedError(step, e.component or "loss", self.last_checkpoint) from e
        loss.total.backward()
        norm = clip_grad_norm(self.params, cfg.max_grad_norm)
        if not np.isfinite(norm):
            raise TrainingDivergedError(step, "gradient", self.last_checkpoint)
        lr = learning_rate(step, cfg.steps, cfg.lr, cfg.schedule, cfg.warmup_steps)
        self.optimizer.step(lr)
        return {"step": step, **loss.components, "lr": lr, "grad_norm": norm}

    def fit(self) -> TrainResult:
        cfg = self.config
        metrics_path = self.output_dir / METRICS_FILE if self.output_dir is not None else None
        if self.output_dir is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        self.save(0)
        sink = open(metrics_path, "w", encoding="utf-8") if metrics_path is not None else None
        try:
            for step in tqdm(range(cfg.steps), desc="train", disable=not self.progress):
                try:
                    record = self.train_step(step)
                except TrainingDivergedError as e:
                    self._log("diverged", {"step": step, "component": e.component,
                                           "checkpoint": str(e.checkpoint)})
                    raise
                last = step == cfg.steps - 1
                val = None
                if cfg.val_every > 0 and ((step + 1) % cfg.val_every == 0 or last):
                    val = self.validate()
                    if val is not None:
                        self._log("validation", {"step": step, "val_epe": val})
                record["val_epe"] = val
                self.records.append(record)
                if sink is not None:
                    sink.write(json.dumps(record) + "\n")
                    sink.flush()
                if cfg.log_every > 0 and (step % cfg.log_every == 0 or last):
                    self._log("train_step", record)
                if cfg.checkpoint_every > 0 and (step + 1) % cfg.checkpoint_every == 0 and not last:
                    self.save(step + 1)
        finally:
            if sink is not None:
                sink.close()
        self.save(cfg.steps)
        return TrainResult(self.checkpoint_path, metrics_path, cfg.steps, self.records)


def train(model: Tracker, config: TrainConfig, train_set: Sequence[RgbdSequence],
          val_set: Optional[Sequence[RgbdSequence]] = None, output_dir: Optional[Path] = None,
          logger: Optional[RunLogger] = None, progress: bool = True) -> TrainResult:
    return Trainer(model, config, train_set, val_set, output_dir, logger, progress).fit()


def read_metrics(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
