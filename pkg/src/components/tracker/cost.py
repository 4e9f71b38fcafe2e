from __future__ import annotations
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from src.components.errors import ConfigError
from src.components.numerics import AttentionCounter, Tensor, no_grad
from src.components.numerics.utils import MAX_COUNTER_VALUE
from src.components.tracker.attention import SpatialAttention, TemporalAttention
from src.components.tracker.layout import chunk_layout
from src.components.tracker.utils import (
    ANCHOR_VARIANTS, ATTENTION_VARIANTS, LOCAL_VARIANTS, SPATIAL_TAGS, TAG_TEMPORAL_TRACKS,
    TAG_TEMPORAL_VIRTUAL, VIRTUAL_VARIANTS,
)

COST_VARIANTS = ("full", "cotracker", "ours_global", "ours_global_local")
_PROBE_DIM = 4


@dataclass
class CostEntry:
    variant: str
    predicted_mac: int
    measured_mac: int
    predicted_total: int
    measured_total: int
    temporal_tracks: int

    @property
    def matches(self) -> bool:
        return self.predicted_mac == self.measured_mac and self.predicted_total == self.measured_total


@dataclass
class CostReport:
    """Score-pair counts per attention variant for one window shape.

    ``*_mac`` are spatial terms (including virtual-track temporal attention);
    ``*_total`` adds the temporal attention of the real tracks.
    """
    T: int
    K: int
    N: int
    M: int
    patch_size: int
    anchors_appended: bool
    entries: list[CostEntry] = field(default_factory=list)

    def entry(self, variant: str) -> CostEntry:
        for e in self.entries:
            if e.variant == variant:
                return e
        raise KeyError(variant)

    @property
    def all_match(self) -> bool:
        return all(e.matches for e in self.entries)

    def to_dict(self):
        return {"T": self.T, "K": self.K, "N": self.N, "M": self.M,
                "patch_size": self.patch_size, "anchors_appended": self.anchors_appended,
                "all_match": self.all_match,
                "variants": {e.variant: {**asdict(e), "matches": e.matches} for e in self.entries}}


def _check_shape(T: int, K: int, N: int, M: int, patch_size: int) -> None:
    if min(T, K, N, M, patch_size) < 1:
        raise ConfigError(f"cost shape needs positive T, K, N, M and patch size, "
                          f"got T={T} K={K} N={N} M={M} p={patch_size}")


def local_pairs(N: int, patch_size: int) -> int:
    """Score pairs of one frame of patch attention over consecutive chunks of L tracks."""
    L = patch_size * patch_size
    full, rest = divmod(N, L)
    return full * L * L + rest * rest


def n_tokens(N: int, M: int, variant: str, appended: bool) -> int:
    return N + M if variant in ANCHOR_VARIANTS and appended else N


def predicted_cost(T: int, K: int, N: int, M: int, patch_size: int, variant: str,
                   appended: bool = True) -> tuple[int, int]:
    """Closed-form (spatial, total) score-pair counts."""
    _check_shape(T, K, N, M, patch_size)
    if variant not in ATTENTION_VARIANTS:
        raise ConfigError(f"unknown attention variant '{variant}'")
    if variant == "full":
        spatial = T * N * N
    elif variant == "none":
        spatial = 0
    elif variant == "cotracker":
        spatial = 2 * T * K * N + T * K * K + K * T * T
    else:
        spatial = T * K * (N + (2 * M if appended else M)) + T * K * K + K * T * T
        if variant in LOCAL_VARIANTS:
            spatial += T * local_pairs(N, patch_size)
    temporal = n_tokens(N, M, variant, appended) * T * T
    return spatial, spatial + temporal


def measure_cost(T: int, K: int, N: int, M: int, patch_size: int, variant: str,
                 appended: bool = True, limit: int = MAX_COUNTER_VALUE) -> AttentionCounter:
    """Runs one counted block of ``variant`` without computing any scores."""
    _check_shape(T, K, N, M, patch_size)
    layout = chunk_layout(N, K, M, patch_size, variant, appended)
    rng = np.random.default_rng(0)
    spatial = SpatialAttention(_PROBE_DIM, 1, variant, rng)
    temporal = TemporalAttention(_PROBE_DIM, 1, rng)
    counter = AttentionCounter(dry_run=True, limit=limit)
    tokens = Tensor(np.zeros((T, layout.n_tracks, _PROBE_DIM)))
    virtual = Tensor(np.zeros((T, K, _PROBE_DIM))) if variant in VIRTUAL_VARIANTS else None
    with no_grad():
        tokens = temporal(tokens, counter, TAG_TEMPORAL_TRACKS)
        if virtual is not None:
            virtual = temporal(virtual, counter, TAG_TEMPORAL_VIRTUAL)
        spatial(tokens, virtual, layout, counter)
    return counter


def attention_cost(T: int, K: int, N: int, M: int, patch_size: int = 4,
                   variants: Sequence[str] = COST_VARIANTS, appended: bool = True,
                   limit: int = MAX_COUNTER_VALUE) -> CostReport:
    report = CostReport(T, K, N, M, patch_size, appended)
    for variant in variants:
        predicted, predicted_total = predicted_cost(T, K, N, M, patch_size, variant, appended)
        counter = measure_cost(T, K, N, M, patch_size, variant, appended, limit)
        measured = counter.count(*SPATIAL_TAGS)
        temporal_tracks = counter.count(TAG_TEMPORAL_TRACKS)
        report.entries.append(CostEntry(variant, predicted, measured, predicted_total,
                                        measured + temporal_tracks, temporal_tracks))
    return report


def cost_sweep(T: int, K: int, M: int, track_counts: Iterable[int], patch_size: int = 4,
               variants: Sequence[str] = COST_VARIANTS, appended: bool = True) -> list[dict]:
    """One row per (track count, variant) for the cost-scaling series."""
    rows = []
    for n in track_counts:
        report = attention_cost(T, K, n, min(M, n) if not appended else M, patch_size,
                                variants, appended)
        for e in report.entries:
            rows.append({"n_tracks": n, "variant": e.variant, "predicted_mac": e.predicted_mac,
                         "measured_mac": e.measured_mac})
    return rows


def fit_residual(track_counts: Sequence[int], costs: Sequence[int], degree: int) -> float:
    """Largest absolute residual of a least-squares polynomial fit of cost vs tracks."""
    x = np.asarray(track_counts, dtype=np.float64)
    y = np.asarray(costs, dtype=np.float64)
    coeffs = np.polyfit(x, y, degree)
    return float(np.max(np.abs(np.polyval(coeffs, x) - y)))
