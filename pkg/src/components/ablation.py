from __future__ import annotations
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.components.errors import ConfigError
from src.components.metrics import EvalReport, MetricsConfig, average_reports, evaluate
from src.components.run_config import RunConfig, set_path
from src.components.run_logger import RunLogger
from src.components.synthdata import RgbdSequence
from src.components.tracker import Tracker, track_dense
from src.components.training import TrainConfig, train

# factor -> (config path, variants); the first variant is the reference.
FACTORS: dict[str, tuple[str, tuple[Any, ...]]] = {
    "depth_repr": ("model.tracker.depth_repr", ("log", "linear", "inverse")),
    "attention": ("model.tracker.attention_variant",
                  ("ours_global_local", "ours_global", "cotracker", "none")),
    "upsampler": ("model.upsampler.variant",
                  ("attention", "attention_no_alibi", "convex", "bilinear", "nearest")),
    "anchors": ("train.use_anchors", (True, False)),
}

TABLE_COLUMNS = ["factor", "variant", "n_seeds", "epe", "depth_error", "aj",
                 "delta_epe", "delta_depth_error", "delta_aj"]


@dataclass
class AblationRow:
    factor: str
    variant: str
    n_seeds: int
    epe: Optional[float]
    depth_error: Optional[float]
    aj: Optional[float]
    delta_epe: Optional[float] = None
    delta_depth_error: Optional[float] = None
    delta_aj: Optional[float] = None


@dataclass
class AblationTable:
    rows: list[AblationRow] = field(default_factory=list)

    def row(self, factor: str, variant: str) -> AblationRow:
        for r in self.rows:
            if r.factor == factor and r.variant == str(variant):
                return r
        raise KeyError(f"no ablation row for {factor}={variant}")

    def to_dict(self):
        return {"rows": [asdict(r) for r in self.rows]}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=TABLE_COLUMNS)

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path


def _delta(value: Optional[float], reference: Optional[float]) -> Optional[float]:
    if value is None or reference is None:
        return None
    return value - reference


def evaluate_model(model: Tracker, sequences: Sequence[RgbdSequence],
                   config: Optional[MetricsConfig] = None, upsample: bool = True) -> EvalReport:
    """Full-frame dense tracking on each sequence, reports averaged."""
    if not sequences:
        raise ConfigError("no evaluation sequences")
    reports = []
    for seq in sequences:
        result = track_dense(model, seq.rgb, seq.depth, upsample=upsample)
        pred = result.fine if result.fine is not None else result.coarse
        reports.append(evaluate(pred, seq, config, name=seq.name))
    return average_reports(reports)


def variant_config(config: RunConfig, factor: str, variant: Any) -> RunConfig:
    if factor not in FACTORS:
        raise ConfigError(f"unknown ablation factor '{factor}' (choose from {sorted(FACTORS)})")
    path, _ = FACTORS[factor]
    return RunConfig(**set_path(config.to_dict(), path, variant))


def run_ablation(config: RunConfig, train_set: Sequence[RgbdSequence],
                 test_set: Sequence[RgbdSequence], factors: Optional[Sequence[str]] = None,
                 logger: Optional[RunLogger] = None, progress: bool = True) -> AblationTable:
    """Trains every variant of each factor under the same budget and seeds.

    Deltas are relative to the factor's reference variant; positive EPE and
    depth deltas mean the variant is worse.
    """
    factors = list(factors or config.ablation.factors)
    test_set = list(test_set)[:config.ablation.eval_sequences]
    unknown = [f for f in factors if f not in FACTORS]
    if unknown:
        raise ConfigError(f"unknown ablation factors {unknown} (choose from {sorted(FACTORS)})")
    table = AblationTable()
    n_jobs = sum(len(FACTORS[f][1]) for f in factors)
    bar = tqdm(total=n_jobs * len(config.ablation.seeds), desc="ablate", disable=not progress)
    for factor in factors:
        reference: Optional[AblationRow] = None
        for variant in FACTORS[factor][1]:
            run = variant_config(config, factor, variant)
            reports = []
            for seed in config.ablation.seeds:
                model = Tracker(run.model, np.random.default_rng(seed))
                train_cfg = TrainConfig(**{**run.train.to_dict(), "steps": config.ablation.steps,
                                           "seed": seed, "val_every": 0, "checkpoint_every": 0})
                train(model, train_cfg, train_set, progress=False)
                # Anchors only matter for training; testing is always full-frame.
                reports.append(evaluate_model(model, test_set, run.metrics,
                                              upsample=run.train.upsample))
                bar.update(1)
            mean = average_reports(reports)
            row = AblationRow(factor, str(variant), len(reports), mean.epe_all, mean.depth_error,
                              mean.aj)
            if reference is None:
                reference = row
            row.delta_epe = _delta(row.epe, reference.epe)
            row.delta_depth_error = _delta(row.depth_error, reference.depth_error)
            row.delta_aj = _delta(row.aj, reference.aj)
            table.rows.append(row)
            if logger is not None:
                logger.log_event("ablation_variant", asdict(row))
    bar.close()
    return table
