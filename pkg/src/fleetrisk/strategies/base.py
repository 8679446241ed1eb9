"""Plumbing shared by all strategies.

A strategy is fitted once on a labeled training table, turns a test table
into cached ``evidence`` (model outputs that do not depend on thresholds)
and then ``decide``\\ s labels from evidence and a threshold config. This
split lets threshold calibration reuse one fitted model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fleetrisk.labeling import SequenceWindow, truck_sequences
from fleetrisk.schema import FleetTable


class StrategyError(ValueError):
    pass


@dataclass(eq=False)
class IndexedWindow:
    window: SequenceWindow
    rows: np.ndarray  # positions of the window's readouts in the source table


def index_windows(table: FleetTable) -> list[IndexedWindow]:
    groups = table.groups()
    out = []
    for seq in truck_sequences(table):
        idx = groups[seq.chassis_id]
        out.append(IndexedWindow(seq, idx[np.argsort(table.timestep[idx], kind="stable")]))
    return out


def scatter(windows: list[IndexedWindow], per_window: list, n_rows: int) -> np.ndarray:
    """Place per-window label lists back at their table rows."""
    out = np.full(n_rows, -1, dtype=np.int64)
    for iw, labels in zip(windows, per_window):
        out[iw.rows] = [int(v) for v in labels]
    if np.any(out < 0):
        raise StrategyError("some test rows received no prediction")
    return out


def with_timestep(table: FleetTable) -> np.ndarray:
    return np.column_stack([table.timestep.astype(np.float64), table.features])


class Strategy:
    name = "base"
    config_type: type = type(None)

    def __init__(self, cfg, seed: int = 0):
        self.cfg = cfg
        self.seed = seed

    def fit(self, train: FleetTable) -> "Strategy":
        raise NotImplementedError

    def evidence(self, test: FleetTable):
        raise NotImplementedError

    def decide(self, evidence, cfg=None) -> np.ndarray:
        raise NotImplementedError

    def predict(self, test: FleetTable) -> np.ndarray:
        return self.decide(self.evidence(test), self.cfg)
