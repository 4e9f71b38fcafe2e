from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np
from tqdm import tqdm

from src.components.errors import DatasetFormatError
from src.components.numerics.serialization import read_json, read_tensor, write_json, write_tensor
from src.components.synthdata.scene import RgbdSequence, SceneConfig, generate_sequence
from src.components.synthdata.utils import (
    CONTAINER_FORMAT, CONTAINER_VERSION, INDEX_FILE, META_FILE, SEQUENCE_TENSORS,
)

# ---------------------------------------------------------------------------
# Generic container: meta.json + one raw tensor file per array
# ---------------------------------------------------------------------------


def write_container(path: Path, kind: str, tensors: dict[str, np.ndarray], meta: dict) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = {}
    for name, array in tensors.items():
        write_tensor(path / f"{name}.bin", array)
        entries[name] = {"file": f"{name}.bin", "shape": list(array.shape),
                         "dtype": "bool" if array.dtype == np.bool_ else array.dtype.name}
    write_json(path / META_FILE, {**meta, "format": kind, "version": CONTAINER_VERSION,
                                  "tensors": entries})
    return path


def read_container(path: Path, kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    meta = read_json(path / META_FILE)
    found = meta.get("format") if isinstance(meta, dict) else None
    if found != kind:
        raise DatasetFormatError(path / META_FILE, f"expected format '{kind}', found '{found}'")
    tensors = {}
    for name, entry in meta.get("tensors", {}).items():
        file = path / entry["file"]
        array = read_tensor(file)
        if list(array.shape) != list(entry["shape"]):
            raise DatasetFormatError(file, f"shape {list(array.shape)} does not match "
                                           f"meta.json shape {entry['shape']}")
        tensors[name] = array
    return meta, tensors


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------

def save_dataset(seq: RgbdSequence, path: Path) -> Path:
    seq.validate()
    tensors = {"rgb": seq.rgb, "depth": seq.depth}
    if seq.gt_tracks is not None:
        tensors["gt_tracks"] = seq.gt_tracks
    if seq.gt_visibility is not None:
        tensors["gt_visibility"] = seq.gt_visibility
    meta = {
        "seed": int(seq.seed),
        "anchor_frame": int(seq.anchor_frame),
        "focal_length": float(seq.focal_length),
        "name": seq.name,
        "config": seq.config,
    }
    return write_container(path, CONTAINER_FORMAT, tensors, meta)


def load_dataset(path: Path) -> RgbdSequence:
    path = Path(path)
    meta, tensors = read_container(path, CONTAINER_FORMAT)
    for required in SEQUENCE_TENSORS[:2]:
        if required not in tensors:
            raise DatasetFormatError(path / META_FILE, f"missing tensor '{required}'")
    seq = RgbdSequence(
        rgb=tensors["rgb"], depth=tensors["depth"],
        gt_tracks=tensors.get("gt_tracks"), gt_visibility=tensors.get("gt_visibility"),
        seed=int(meta.get("seed", 0)), anchor_frame=int(meta.get("anchor_frame", 0)),
        focal_length=float(meta.get("focal_length", 64.0)), config=meta.get("config"),
        name=meta.get("name", "") or path.name,
    )
    try:
        seq.validate()
    except ValueError as e:
        raise DatasetFormatError(path, str(e)) from None
    return seq


def is_sequence_dir(path: Path) -> bool:
    meta = Path(path) / META_FILE
    if not meta.is_file():
        return False
    return read_json(meta).get("format") == CONTAINER_FORMAT


# ---------------------------------------------------------------------------
# Collections: <root>/<split>/<name>/ plus <root>/dataset.json
# ---------------------------------------------------------------------------

def _generate_one(args) -> RgbdSequence:
    config, seed, anchor, name = args
    seq = generate_sequence(config, seed, anchor_frame=anchor)
    seq.name = name
    return seq


def generate_split(config: SceneConfig, seeds: Sequence[int], anchors: dict[str, int],
                   root: Path, split: str, threads: int = 1,
                   progress: bool = True) -> list[str]:
    """Generate and save every (seed, anchor) clip of one split."""
    jobs = []
    for seed in seeds:
        for anchor_name, anchor in anchors.items():
            jobs.append((config, int(seed), anchor, f"seq_{seed:06d}_{anchor_name}"))
    names = []
    bar = tqdm(total=len(jobs), desc=f"gen {split}", disable=not progress)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for seq in pool.map(_generate_one, jobs):
                save_dataset(seq, Path(root) / split / seq.name)
                names.append(seq.name)
                bar.update(1)
    else:
        for job in jobs:
            seq = _generate_one(job)
            save_dataset(seq, Path(root) / split / seq.name)
            names.append(seq.name)
            bar.update(1)
    bar.close()
    return names


def write_index(root: Path, splits: dict[str, list[str]], meta: Optional[dict] = None) -> Path:
    return write_json(Path(root) / INDEX_FILE, {"format": CONTAINER_FORMAT + "-collection",
                                                "splits": splits, **(meta or {})})


def list_split(root: Path, split: str) -> list[Path]:
    root = Path(root)
    if is_sequence_dir(root):
        return [root]
    index_path = root / INDEX_FILE
    if index_path.is_file():
        splits = read_json(index_path).get("splits", {})
        if split not in splits:
            raise DatasetFormatError(index_path, f"no split named '{split}'")
        return [root / split / name for name in splits[split]]
    split_dir = root / split if (root / split).is_dir() else root
    paths = sorted(p for p in split_dir.iterdir() if is_sequence_dir(p))
    if not paths:
        raise DatasetFormatError(root, f"no sequences found for split '{split}'")
    return paths


class SequenceCollection:
    """Lazily loaded list of sequences from one split."""

    def __init__(self, paths: Sequence[Path], cache: bool = True):
        self.paths = [Path(p) for p in paths]
        self._cache: dict[int, RgbdSequence] = {}
        self._use_cache = cache

    @classmethod
    def open(cls, root: Path, split: str, limit: Optional[int] = None) -> "SequenceCollection":
        paths = list_split(root, split)
        return cls(paths[:limit] if limit else paths)

    def __len__(self) -> int:
        return len(self.paths)

    def __getitem__(self, i: int) -> RgbdSequence:
        if i in self._cache:
            return self._cache[i]
        seq = load_dataset(self.paths[i])
        if self._use_cache:
            self._cache[i] = seq
        return seq

    def __iter__(self) -> Iterator[RgbdSequence]:
        for i in range(len(self)):
            yield self[i]
