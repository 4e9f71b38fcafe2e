from __future__ import annotations
import argparse
import sys
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import ValidationError

sys.path.insert(0, str(Path(__file__).parent))

from src.components.ablation import FACTORS, run_ablation
from src.components.errors import ConfigError, DatasetFormatError, Track3DError
from src.components.metrics import average_reports, evaluate, state_from_ground_truth
from src.components.metrics.utils import REPORT_FILE
from src.components.numerics import read_json, write_json
from src.components.plot_data import (
    DEFAULT_TRACK_COUNTS, PLOT_KINDS, cost_series, training_series, write_series,
)
from src.components.run_config import (
    PRESETS, RunConfig, load_environment, resolve_config, write_resolved,
)
from src.components.run_logger import RunLogger, create_run_logger
from src.components.synthdata import (
    SequenceCollection, anchor_frames, generate_split, load_dataset, write_index,
)
from src.components.synthdata.utils import CONTAINER_FORMAT, META_FILE, TRACKS_FORMAT
from src.components.track_state import TrackState, load_track_file, save_track_file
from src.components.tracker import (
    Tracker, attention_cost, fit_residual, grid_queries, load_checkpoint, track_dense,
    track_video,
)
from src.components.training import train

COMMANDS = ("gen", "train", "track", "eval", "bench-attn", "ablate", "plot-data")
SPLITS = ("train", "val", "test")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

# Least-squares degree of cost against track count per variant.
FIT_DEGREES = {"full": 2, "cotracker": 1, "ours_global": 1}


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _split_list(text: Optional[str]) -> Optional[list[str]]:
    if text is None:
        return None
    return [part.strip() for part in text.split(",") if part.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in _split_list(text) or []]
    except ValueError as e:
        raise ConfigError(f"expected a comma-separated list of integers, got '{text}'") from e


def _open_split(root: Path, split: str, limit: Optional[int] = None,
                required: bool = True) -> Optional[SequenceCollection]:
    try:
        return SequenceCollection.open(root, split, limit)
    except DatasetFormatError:
        if required:
            raise
        return None


def _warn_threads(config: RunConfig) -> None:
    if config.threads > 1:
        print(f"warning: --threads {config.threads}: outputs are not guaranteed to be "
              f"bit-identical across thread counts", file=sys.stderr)


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _load_prediction(path: Path) -> TrackState:
    """A track file, or a dataset sequence whose ground truth is read as the prediction."""
    meta_path = path / META_FILE
    if not meta_path.is_file():
        raise DatasetFormatError(meta_path, "prediction not found")
    fmt = read_json(meta_path).get("format")
    if fmt == TRACKS_FORMAT:
        return load_track_file(path)[0]
    if fmt == CONTAINER_FORMAT:
        return state_from_ground_truth(load_dataset(path))
    raise DatasetFormatError(meta_path, f"'{fmt}' is neither a track file nor a sequence")


def _prediction_path(pred_root: Path, name: str, split: str, single: bool) -> Path:
    if single and (pred_root / META_FILE).is_file():
        return pred_root
    for candidate in (pred_root / name, pred_root / split / name):
        if (candidate / META_FILE).is_file():
            return candidate
    raise DatasetFormatError(pred_root, f"no prediction for sequence '{name}'")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen(args, config: RunConfig, out: Path, logger: RunLogger) -> dict:
    anchors = anchor_frames(config.scene.T, config.data.anchors)
    splits = {}
    for split in SPLITS:
        seeds = config.data.seeds(split, config.seed)
        splits[split] = generate_split(config.scene, seeds, anchors, out, split,
                                       config.threads, not args.no_progress)
        logger.log_event("dataset_written", {"split": split, "n_sequences": len(splits[split])})
    write_index(out, splits, {"scene": config.scene.to_dict(), "seed": config.seed,
                              "anchors": anchors})
    return {"sequences": {k: len(v) for k, v in splits.items()}}


def cmd_train(args, config: RunConfig, out: Path, logger: RunLogger) -> dict:
    train_set = _open_split(args.data, "train")
    val_set = _open_split(args.data, "val", required=False)
    if args.init is not None:
        model = load_checkpoint(args.init)
    else:
        model = Tracker(config.model, np.random.default_rng(config.seed))
    result = train(model, config.train, train_set, val_set, output_dir=out, logger=logger,
                   progress=not args.no_progress)
    return {"checkpoint": str(result.checkpoint), "steps": result.steps,
            "final": result.final}


def cmd_track(args, config: RunConfig, out: Path, logger: RunLogger) -> dict:
    model = load_checkpoint(args.checkpoint)
    if args.sparse_mode:
        model.config.tracker.sparse_mode = True
    queries = None
    if args.queries is not None:
        queries = np.asarray(read_json(args.queries), dtype=np.float64).reshape(-1, 2)
    sequences = _open_split(args.data, args.split)
    upsample = not args.no_upsample and not args.sparse_mode

    def run(i: int) -> str:
        seq = sequences[i]
        if args.sparse_mode:
            r = model.stride
            q = queries if queries is not None else grid_queries(seq.H // r, seq.W // r, r)
            state = track_video(model, seq.rgb, seq.depth, q)
        else:
            result = track_dense(model, seq.rgb, seq.depth, upsample=upsample)
            state = result.fine if result.fine is not None else result.coarse
        name = seq.name or f"seq_{i:06d}"
        save_track_file(state, out / name, {"sequence": name,
                                            "mode": "sparse" if args.sparse_mode else "dense",
                                            "upsampled": upsample})
        logger.log_event("tracks_written", {"sequence": name, "n_tracks": state.N})
        return name

    names = _map(run, range(len(sequences)), config.threads)
    return {"tracks": names}


def cmd_eval(args, config: RunConfig, out: Path, logger: RunLogger) -> dict:
    sequences = _open_split(args.data, args.split)
    single = len(sequences) == 1
    reports = []
    for seq in sequences:
        path = _prediction_path(args.pred, seq.name, args.split, single)
        reports.append(evaluate(_load_prediction(path), seq, config.metrics))
    mean = average_reports(reports)
    write_json(out / REPORT_FILE, {"mean": mean.to_dict(),
                                   "sequences": [r.to_dict() for r in reports]})
    logger.log_event("evaluation", mean.to_dict())
    return {"epe_all": mean.epe_all, "occ_iou": mean.occ_iou, "aj": mean.aj}


def cmd_bench_attn(args, config: RunConfig, out: Path, logger: RunLogger) -> dict:
    report = attention_cost(args.T, args.K, args.N, args.M, args.patch_size)
    counts = _int_list(args.sweep) if args.sweep else list(DEFAULT_TRACK_COUNTS)
    frame = cost_series(args.T, args.K, args.M, counts, args.patch_size)
    fits = {}
    for variant, degree in FIT_DEGREES.items():
        costs = frame[frame["variant"] == variant]["measured_mac"].tolist()
        fits[variant] = {"degree": degree, "residual": fit_residual(counts, costs, degree)}
    write_json(out / "cost_report.json", {**report.to_dict(), "sweep_fit": fits})
    write_series(frame, out / "cost_sweep.csv")
    return {"all_match": report.all_match,
            "spatial": {e.variant: e.predicted_mac for e in report.entries}}


def cmd_ablate(args, config: RunConfig, out: Path, logger: RunLogger) -> dict:
    train_set = _open_split(args.data, "train")
    test_set = _open_split(args.data, "test", limit=config.ablation.eval_sequences)
    table = run_ablation(config, train_set, test_set, _split_list(args.factors), logger,
                         progress=not args.no_progress)
    write_json(out / "ablation.json", table.to_dict())
    table.write_csv(out / "ablation.csv")
    return {"rows": len(table.rows)}


def cmd_plot_data(args, config: RunConfig, out: Path, logger: RunLogger) -> dict:
    if args.kind == "training":
        if args.metrics is None:
            raise ConfigError("plot-data training needs --metrics")
        path = write_series(training_series(args.metrics), out / "training_series.csv")
    else:
        counts = _int_list(args.sweep) if args.sweep else list(DEFAULT_TRACK_COUNTS)
        path = write_series(cost_series(args.T, args.K, args.M, counts, args.patch_size),
                            out / "cost_series.csv")
    return {"csv": str(path)}


HANDLERS = {
    "gen": cmd_gen, "train": cmd_train, "track": cmd_track, "eval": cmd_eval,
    "bench-attn": cmd_bench_attn, "ablate": cmd_ablate, "plot-data": cmd_plot_data,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(PRESETS), default="desk",
                        help="hyperparameter preset (default: %(default)s)")
    common.add_argument("--config", type=Path, default=None,
                        help="JSON config file merged over the preset")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY.PATH=VALUE", help="override one config value (repeatable)")
    common.add_argument("--out", type=Path, default=None,
                        help="output directory (default: $TRACK3D_OUTPUT_DIR/<command>)")
    common.add_argument("--log-dir", type=Path, default=None,
                        help="run log directory (default: $TRACK3D_LOG_DIR or logs)")
    common.add_argument("--seed", type=int, default=None, help="base seed (default: preset)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads; not bit-exact across counts (default: 1)")
    common.add_argument("--no-progress", action="store_true", help="disable progress bars")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="track3d", description="Dense 3D point tracking")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("gen", parents=[common], formatter_class=fmt,
                       help="generate train/val/test synthetic RGB-D splits")
    p.add_argument("--anchors", default=None, help="comma list of first,middle,last")
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--n-val", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)

    p = sub.add_parser("train", parents=[common], formatter_class=fmt,
                       help="patchwise training; writes a checkpoint and metrics.jsonl")
    p.add_argument("--data", type=Path, required=True, help="dataset root written by gen")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--init", type=Path, default=None, help="checkpoint to start from")

    p = sub.add_parser("track", parents=[common], formatter_class=fmt,
                       help="track every sequence of a split; one track file per sequence")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="dataset root or sequence directory")
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--sparse-mode", action="store_true",
                   help="query points only, no local attention and no upsampler")
    p.add_argument("--queries", type=Path, default=None,
                   help="JSON list of frame-0 [u, v] queries for --sparse-mode")
    p.add_argument("--no-upsample", action="store_true", help="emit coarse tracks only")

    p = sub.add_parser("eval", parents=[common], formatter_class=fmt,
                       help="score track files (or ground truth) against a dataset split")
    p.add_argument("--pred", type=Path, required=True,
                   help="track directory, or a dataset directory read as prediction")
    p.add_argument("--data", type=Path, required=True, help="ground-truth dataset root")
    p.add_argument("--split", choices=SPLITS, default="test")

    p = sub.add_parser("bench-attn", parents=[common], formatter_class=fmt,
                       help="predicted and counted attention cost per variant")
    p.add_argument("--T", type=int, default=8, help="frames per window")
    p.add_argument("--K", type=int, default=16, help="virtual tracks")
    p.add_argument("--N", type=int, default=1200, help="tracks")
    p.add_argument("--M", type=int, default=108, help="anchor tracks")
    p.add_argument("--patch-size", type=int, default=4, help="local attention patch side")
    p.add_argument("--sweep", default=None, help="comma list of track counts for the CSV")

    p = sub.add_parser("ablate", parents=[common], formatter_class=fmt,
                       help="train and test each ablation variant under one budget")
    p.add_argument("--data", type=Path, required=True, help="dataset root written by gen")
    p.add_argument("--factors", default=None, help=f"comma list from {','.join(FACTORS)}")
    p.add_argument("--steps", type=int, default=None, help="training steps per variant and seed")

    p = sub.add_parser("plot-data", parents=[common], formatter_class=fmt,
                       help="CSV series for the cost-scaling and training-curve figures")
    p.add_argument("kind", choices=PLOT_KINDS)
    p.add_argument("--metrics", type=Path, default=None, help="metrics.jsonl of a training run")
    p.add_argument("--T", type=int, default=8)
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--M", type=int, default=108)
    p.add_argument("--patch-size", type=int, default=4)
    p.add_argument("--sweep", default=None, help="comma list of track counts")
    return parser


def _flags(args) -> dict:
    """Dedicated flags as dotted config paths; ``None`` values are skipped."""
    flags = {"seed": args.seed, "threads": args.threads}
    if args.seed is not None:
        flags["train.seed"] = args.seed
    if args.command == "gen":
        flags.update({"data.anchors": _split_list(args.anchors), "data.n_train": args.n_train,
                      "data.n_val": args.n_val, "data.n_test": args.n_test})
    elif args.command == "train":
        flags.update({"train.steps": args.steps, "train.lr": args.lr})
    elif args.command == "ablate":
        flags["ablation.steps"] = args.steps
    return flags


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logger: Optional[RunLogger] = None
    try:
        env = load_environment()
        config = resolve_config(args.preset, args.config, args.overrides, _flags(args))
        out = args.out if args.out is not None else env.output_dir / args.command
        out.mkdir(parents=True, exist_ok=True)
        logger = create_run_logger(args.log_dir or env.log_dir,
                                   f"{args.command}_{uuid.uuid4().hex[:8]}")

        print(f"\n{'═'*60}")
        print(f"  track3d {args.command} | preset: {config.preset}  seed: {config.seed}")
        print(f"  Output dir: {out}")
        print(f"  Run log:    {logger.get_log_path()}")
        print(f"{'═'*60}\n")

        _warn_threads(config)
        write_resolved(config, out)
        logger.log_run_start(args.command, config.to_dict())
        summary = HANDLERS[args.command](args, config, out, logger)
        logger.log_run_end("ok", summary)
        return EXIT_OK
    except (ConfigError, ValidationError) as e:
        return _fail(logger, e, EXIT_CONFIG)
    except (Track3DError, OSError, ValueError) as e:
        return _fail(logger, e, EXIT_RUNTIME)


def _fail(logger: Optional[RunLogger], error: Exception, code: int) -> int:
    print(f"error: {error}", file=sys.stderr)
    if logger is not None:
        logger.log_run_end("error", {"error": str(error), "exit_code": code})
    return code


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
