"""Feature engineering: derivatives, db4 wavelets, per-split quantile shift."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from fleetrisk.labeling import SequenceWindow
from fleetrisk.schema import FleetTable
from fleetrisk.wavelet import cascade_counts, dwt_db4, max_level

SPLIT_KEYS = ("train", "test_gen1", "test_gen2")
DEFAULT_Q = 0.005


@dataclass(frozen=True)
class FeatureOptions:
    include_raw: bool = True
    include_derivative: bool = True
    include_wavelet: bool = False
    wavelet_levels: int = 1
    quantile_q: float = DEFAULT_Q

    def validate(self, length: int | None = None) -> None:
        if not 0.0 < self.quantile_q < 0.5:
            raise ValueError("quantile_q must lie in (0, 0.5)")
        if self.wavelet_levels < 1:
            raise ValueError("wavelet_levels must be positive")
        if length is not None and self.include_wavelet and self.wavelet_levels > max_level(length):
            raise ValueError(f"{self.wavelet_levels} wavelet levels too deep for windows of length {length}")
        if not (self.include_raw or self.include_derivative or self.include_wavelet):
            raise ValueError("at least one feature block must be enabled")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureOptions":
        known = {f.name for f in fields(cls)}
        if set(data) - known:
            raise ValueError(f"unknown feature option keys {sorted(set(data) - known)}")
        return cls(**data)


def first_derivative(series) -> np.ndarray:
    """Backward difference with a leading zero, same length as the input.

    Works column-wise on 2-D input (time along axis 0).
    """
    x = np.asarray(series, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("derivative of an empty series")
    out = np.zeros_like(x)
    out[1:] = x[1:] - x[:-1]
    return out


def lower_quantile(values, q: float) -> np.ndarray:
    """Order statistic at index floor(q * (n - 1)) of each column."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] == 0:
        raise ValueError("quantile of an empty column")
    k = int(np.floor(q * (v.shape[0] - 1)))
    return np.partition(v, k, axis=0)[k]


def quantile_shift_normalize(table: FleetTable, q: float = DEFAULT_Q, split_key: str = "train") -> FleetTable:
    """Subtract each feature's lower q-quantile, computed within this split."""
    if split_key not in SPLIT_KEYS:
        raise ValueError(f"unknown split {split_key!r}")
    if split_key != "train":
        want = split_key.split("_")[1]
        if np.any(table.gen != want):
            raise ValueError(f"split {split_key} contains rows that are not {want}")
    if len(table) == 0:
        raise ValueError("cannot normalize an empty split")
    return table.with_features(table.features - lower_quantile(table.features, q))


def normalize_test_table(table: FleetTable, q: float = DEFAULT_Q) -> FleetTable:
    """Normalize gen1 and gen2 rows of a test table separately, keeping row order."""
    out = table.features.copy()
    for gen in ("gen1", "gen2"):
        idx = np.flatnonzero(table.gen == gen)
        if len(idx):
            part = quantile_shift_normalize(table.take(idx), q, f"test_{gen}")
            out[idx] = part.features
    return table.with_features(out)


def wavelet_block_size(length: int, n_features: int, levels: int) -> int:
    counts = cascade_counts(length, levels)
    return n_features * (counts[-1] + sum(counts))


def build_feature_matrix(window: SequenceWindow, opts: FeatureOptions) -> tuple[np.ndarray, np.ndarray]:
    """Per-timestep matrix and flat vector for one window.

    Row matrix columns are raw features then their derivatives. The flat
    vector is the row matrix in time-major order followed, per feature, by
    that feature's wavelet coefficients (approximation, then details from
    coarsest to finest level).
    """
    x = np.asarray(window.rows, dtype=np.float64)
    L = x.shape[0]
    if opts.include_derivative and L < 2:
        raise ValueError("derivatives need windows of at least 2 readouts")
    opts.validate(L)
    blocks = []
    if opts.include_raw:
        blocks.append(x)
    if opts.include_derivative:
        blocks.append(first_derivative(x))
    rows = np.hstack(blocks) if blocks else np.zeros((L, 0))
    flat = [rows.reshape(-1)]
    if opts.include_wavelet:
        flat.extend(dwt_db4(x[:, f], opts.wavelet_levels).flat() for f in range(x.shape[1]))
    return rows, np.concatenate(flat)


def flat_matrix(windows: list[SequenceWindow], opts: FeatureOptions) -> np.ndarray:
    return np.vstack([build_feature_matrix(w, opts)[1] for w in windows])


def row_matrix(windows: list[SequenceWindow], opts: FeatureOptions) -> np.ndarray:
    return np.vstack([build_feature_matrix(w, opts)[0] for w in windows])
