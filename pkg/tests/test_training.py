"""
Unit tests for losses, the optimiser and the patchwise training loop.

Tests cover:
- LossWeights validation and uniform iteration weights
- compute_loss on perfect and shifted predictions, weight linearity, occlusion masking
- Non-finite loss components named in the error
- Learning-rate schedules, gradient clipping and the first Adam step
- Patch sampling: anchors extend tokens without changing targets
- End-to-end gradient check through tracker, upsampler and loss
- Zero learning rate, determinism of metrics logs, checkpoints and divergence
"""

import numpy as np
import pytest

from src.components.errors import ConfigError, NonFiniteError, TrainingDivergedError
from src.components.numerics import Parameter, Tensor, grad_check
from src.components.synthdata import SceneConfig, generate_sequence
from src.components.tracker import Tracker, load_checkpoint
from src.components.training import (
    Adam, LossWeights, TrackPrediction, TrackTargets, TrainConfig, Trainer, clip_grad_norm,
    compute_loss, learning_rate, patch_loss, read_metrics, sample_patch, train,
)
from src.components.training.utils import LOSS_COMPONENTS, METRICS_FILE
from tests.conftest import micro_config


def _targets(T=3, N=4, seed=0):
    rng = np.random.default_rng(seed)
    tracks = np.concatenate([rng.uniform(0, 8, (T, N, 2)), rng.uniform(1, 4, (T, N, 1))], -1)
    vis = rng.uniform(size=(T, N)) < 0.6
    return TrackTargets(tracks, vis)


def _perfect(targets: TrackTargets, logit: float = 20.0) -> TrackPrediction:
    vis_logit = np.where(targets.visibility[..., None], logit, -logit)
    return TrackPrediction(uv=Tensor(targets.tracks[..., :2].copy()),
                           log_d=Tensor(np.log(targets.tracks[..., 2:3])),
                           vis_logit=Tensor(vis_logit))


def _dataset(n=2, seed=0):
    cfg = SceneConfig(T=3, H=8, W=8, n_sprites=1, sprite_size_range=(2, 4))
    return [generate_sequence(cfg, seed=seed + i) for i in range(n)]


def _train_config(**overrides) -> TrainConfig:
    base = dict(steps=3, lr=1e-3, warmup_steps=1, patch=(2, 2), val_every=3, val_sequences=1,
                checkpoint_every=2, log_every=1)
    base.update(overrides)
    return TrainConfig(**base)


def _model(seed=0, **overrides) -> Tracker:
    return Tracker(micro_config(**overrides), np.random.default_rng(seed))


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

class TestLossWeights:

    def test_defaults(self):
        w = LossWeights()
        assert (w.lambda_2d, w.lambda_depth, w.lambda_visib) == (100.0, 1.0, 0.1)
        assert w.iteration_weights(4) == [0.25] * 4

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(lambda_depth=-1.0)

    def test_iteration_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            LossWeights(per_iteration_weights=[0.5, 0.6])


class TestComputeLoss:

    def test_perfect_prediction_is_near_zero(self):
        targets = _targets()
        pred = _perfect(targets)
        loss = compute_loss([pred], targets, fine=_perfect(targets), fine_targets=targets)
        assert 0.0 <= loss.components["total"] < 1e-6

    def test_unit_shift_costs_lambda(self):
        targets = _targets()
        pred = _perfect(targets)
        pred.uv = pred.uv + np.array([1.0, 0.0])
        loss = compute_loss([pred], targets)
        assert loss.components["coarse_2d"] == pytest.approx(100.0)
        assert loss.components["coarse_depth"] == pytest.approx(0.0, abs=1e-12)

    def test_doubling_lambda_doubles_component(self):
        targets = _targets(seed=1)
        pred = _perfect(targets)
        pred.uv = pred.uv + np.random.default_rng(2).normal(size=pred.uv.shape)
        base = compute_loss([pred], targets, LossWeights()).components["coarse_2d"]
        doubled = compute_loss([pred], targets, LossWeights(lambda_2d=200.0)).components["coarse_2d"]
        assert doubled == 2.0 * base

    def test_components_sum_to_total(self):
        targets = _targets(seed=3)
        rng = np.random.default_rng(4)
        iters = []
        for _ in range(2):
            p = _perfect(targets, logit=0.3)
            p.uv = p.uv + rng.normal(size=p.uv.shape)
            p.log_d = p.log_d + rng.normal(0, 0.1, size=p.log_d.shape)
            iters.append(p)
        loss = compute_loss(iters, targets, fine=iters[0], fine_targets=targets)
        parts = sum(loss.components[k] for k in LOSS_COMPONENTS[1:])
        assert loss.components["total"] == pytest.approx(parts)
        assert list(loss.components) == list(LOSS_COMPONENTS)

    def test_occluded_positions_can_be_ignored(self):
        targets = _targets(seed=5)
        targets.visibility[0, 0] = False
        pred = _perfect(targets)
        shift = np.zeros(pred.uv.shape)
        shift[~targets.visibility] = 5.0
        pred.uv = pred.uv + shift
        masked = compute_loss([pred], targets, LossWeights(supervise_occluded=False))
        assert masked.components["coarse_2d"] == pytest.approx(0.0, abs=1e-12)
        assert compute_loss([pred], targets).components["coarse_2d"] > 0

    def test_non_finite_component_is_named(self):
        targets = _targets()
        pred = _perfect(targets)
        pred.log_d = Tensor(np.full(pred.log_d.shape, np.nan))
        with pytest.raises(NonFiniteError, match="coarse_depth") as info:
            compute_loss([pred], targets)
        assert info.value.component == "coarse_depth"

    def test_final_iteration_needs_visibility(self):
        targets = _targets()
        pred = _perfect(targets)
        pred.vis_logit = None
        with pytest.raises(ValueError):
            compute_loss([pred], targets)


# ---------------------------------------------------------------------------
# Optimiser
# ---------------------------------------------------------------------------

class TestOptimizer:

    def test_warmup_then_constant(self):
        lrs = [learning_rate(s, 10, 1.0, "warmup_constant", 4) for s in range(6)]
        assert lrs == [0.25, 0.5, 0.75, 1.0, 1.0, 1.0]

    def test_one_cycle_anneals(self):
        lrs = [learning_rate(s, 10, 1.0, "one_cycle", 2) for s in range(10)]
        assert lrs[1] == 1.0
        assert lrs[2] == pytest.approx(1.0)
        assert lrs[-1] == pytest.approx(1e-4)
        assert all(a >= b for a, b in zip(lrs[2:], lrs[3:]))

    def test_clip_grad_norm(self):
        p = Parameter(np.zeros(2))
        p.grad = np.array([3.0, 4.0])
        assert clip_grad_norm([p], 1.0) == pytest.approx(5.0)
        np.testing.assert_allclose(p.grad, [0.6, 0.8], atol=1e-9)

    def test_first_adam_step_moves_by_lr(self):
        p = Parameter(np.array([1.0, -1.0]))
        p.grad = np.array([0.5, -2.0])
        Adam([p]).step(0.1)
        np.testing.assert_allclose(p.data, [0.9, -0.9], atol=1e-6)

    def test_zero_lr_keeps_data(self):
        p = Parameter(np.array([1.0, 2.0]))
        before = p.data.copy()
        p.grad = np.array([1.0, 1.0])
        Adam([p]).step(0.0)
        np.testing.assert_array_equal(p.data, before)


# ---------------------------------------------------------------------------
# Patch sampling and the loop
# ---------------------------------------------------------------------------

class TestSamplePatch:

    def test_anchors_do_not_change_targets(self):
        model, seq = _model(), _dataset(1)[0]
        with_anchors = sample_patch(model, seq, _train_config(), np.random.default_rng(7))
        without = sample_patch(model, seq, _train_config(use_anchors=False),
                               np.random.default_rng(7))
        np.testing.assert_array_equal(with_anchors.targets.tracks, without.targets.tracks)
        np.testing.assert_array_equal(with_anchors.fine_targets.tracks, without.fine_targets.tracks)
        assert with_anchors.queries.shape[0] == without.queries.shape[0] + 1
        assert with_anchors.layout.n_appended == 1

    def test_targets_follow_queries(self):
        model, seq = _model(), _dataset(1)[0]
        sample = sample_patch(model, seq, _train_config(flip_prob=0.0), np.random.default_rng(0))
        np.testing.assert_array_equal(sample.targets.tracks[0, :, :2],
                                      sample.queries[:sample.n_patch])
        assert sample.fine_targets.tracks.shape == (3, 16, 3)

    def test_patch_too_large(self):
        with pytest.raises(ConfigError, match="does not fit"):
            sample_patch(_model(), _dataset(1)[0], _train_config(patch=(5, 2)),
                         np.random.default_rng(0))

    def test_end_to_end_gradient(self):
        model, seq = _model(), _dataset(1)[0]
        cfg = _train_config(flip_prob=0.0, brightness_jitter=0.0)
        sample = sample_patch(model, seq, cfg, np.random.default_rng(1))

        def loss(_):
            return patch_loss(model, sample, LossWeights(lambda_2d=1.0)).total

        params = (model.encoder.parameters()[:2] + model.transformer.parameters()[-8:]
                  + model.upsampler.parameters()[-2:])
        err = grad_check(loss, params, n_samples=2, floor=1e-4, rng=np.random.default_rng(0))
        assert err < 1e-4


class TestTrainer:

    def test_zero_learning_rate_keeps_weights(self):
        model = _model()
        before = model.state_dict()
        Trainer(model, _train_config(lr=0.0, val_every=0), _dataset(), progress=False).fit()
        after = model.state_dict()
        for name, value in before.items():
            np.testing.assert_array_equal(after[name], value)

    def test_weights_change_with_positive_lr(self):
        model = _model()
        before = model.state_dict()
        Trainer(model, _train_config(val_every=0), _dataset(), progress=False).fit()
        assert any(not np.array_equal(before[k], v) for k, v in model.state_dict().items())

    def test_metrics_log_records(self, tmp_path):
        result = train(_model(), _train_config(), _dataset(), _dataset(1, seed=10),
                       output_dir=tmp_path, progress=False)
        records = read_metrics(tmp_path / METRICS_FILE)
        assert [r["step"] for r in records] == [0, 1, 2]
        assert set(LOSS_COMPONENTS) <= set(records[0])
        assert records[0]["val_epe"] is None
        assert records[-1]["val_epe"] is not None and records[-1]["val_epe"] >= 0
        assert records == result.records

    def test_same_seed_same_log(self, tmp_path):
        for name in ("a", "b"):
            train(_model(), _train_config(), _dataset(), _dataset(1, seed=10),
                  output_dir=tmp_path / name, progress=False)
        assert (tmp_path / "a" / METRICS_FILE).read_bytes() == \
            (tmp_path / "b" / METRICS_FILE).read_bytes()

    def test_checkpoint_round_trip(self, tmp_path):
        model = _model()
        result = train(model, _train_config(val_every=0), _dataset(), output_dir=tmp_path,
                       progress=False)
        loaded = load_checkpoint(result.checkpoint)
        for name, value in model.state_dict().items():
            np.testing.assert_array_equal(loaded.state_dict()[name], value)

    def test_divergence_reports_last_checkpoint(self, tmp_path):
        cfg = _train_config(loss=LossWeights(lambda_2d=float("inf")), val_every=0)
        with pytest.raises(TrainingDivergedError) as info:
            train(_model(), cfg, _dataset(), output_dir=tmp_path, progress=False)
        assert info.value.step == 0
        assert info.value.component == "coarse_2d"
        assert info.value.checkpoint == tmp_path / "checkpoint"

    def test_empty_training_set(self):
        with pytest.raises(ConfigError):
            Trainer(_model(), _train_config(), [], progress=False)

    def test_without_fine_supervision(self):
        result = train(_model(), _train_config(upsample=False, val_every=0), _dataset(),
                       progress=False)
        assert result.final["fine_2d"] == 0.0
