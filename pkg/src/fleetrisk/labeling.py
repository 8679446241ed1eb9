"""Risk labels from time-to-failure and fixed-length window extraction.

Label bands are half-open: ttf in [0, 9) is High, [9, 18) is Medium and
anything from 18 on (or a truck that never fails) is Low. A window of length
10 ends at its anchor readout and includes the 9 readouts before it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from fleetrisk.schema import FleetTable, RiskLabel

logger = logging.getLogger(__name__)

HIGH_BAND = 9
MEDIUM_BAND = 18
WINDOW_LENGTH = 10
POLICIES = ("mirror_test", "unhealthy_anchored")


class ExtractionError(ValueError):
    pass


class MappingError(KeyError):
    pass


@dataclass(eq=False)
class SequenceWindow:
    """Consecutive readouts of one truck.

    ``labels`` are :class:`RiskLabel` integer codes aligned with ``rows``.
    """

    chassis_id: str
    gen: str
    start_timestep: int
    rows: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def timesteps(self) -> np.ndarray:
        return np.arange(self.start_timestep, self.start_timestep + len(self), dtype=np.int64)

    @property
    def end_timestep(self) -> int:
        return self.start_timestep + len(self) - 1

    @property
    def unhealthy(self) -> bool:
        if self.labels is None:
            raise ExtractionError("window carries no labels")
        return bool(np.any(self.labels > RiskLabel.LOW))


def assign_risk_label(ttf: int | None) -> RiskLabel:
    if ttf is None:
        return RiskLabel.LOW
    if ttf < 0:
        raise ValueError(f"time to failure must be nonnegative, got {ttf}")
    if ttf < HIGH_BAND:
        return RiskLabel.HIGH
    if ttf < MEDIUM_BAND:
        return RiskLabel.MEDIUM
    return RiskLabel.LOW


def risk_codes(timesteps: np.ndarray, failure: int | None) -> np.ndarray:
    """Vectorised :func:`assign_risk_label` over one truck's timesteps."""
    timesteps = np.asarray(timesteps, dtype=np.int64)
    if failure is None:
        return np.zeros(len(timesteps), dtype=np.int64)
    ttf = failure - timesteps
    if np.any(ttf < 0):
        raise ValueError("readout recorded after the failure timestep")
    return np.where(ttf < HIGH_BAND, 2, np.where(ttf < MEDIUM_BAND, 1, 0)).astype(np.int64)


def label_fleet(fleet: FleetTable, failures: Mapping[str, int | None]) -> FleetTable:
    codes = np.zeros(len(fleet), dtype=np.int64)
    for cid, idx in fleet.groups().items():
        if cid not in failures:
            raise MappingError(f"chassis {cid!r} missing from failure map")
        codes[idx] = risk_codes(fleet.timestep[idx], failures[cid])
    return fleet.with_labels(codes)


def truck_sequences(fleet: FleetTable) -> list[SequenceWindow]:
    """Each truck's rows as one window, trucks in order of first appearance."""
    out = []
    for cid, idx in fleet.groups().items():
        order = idx[np.argsort(fleet.timestep[idx], kind="stable")]
        if np.any(np.diff(fleet.timestep[order]) != 1):
            raise ExtractionError(f"chassis {cid}: rows are not consecutive timesteps")
        out.append(
            SequenceWindow(
                chassis_id=cid,
                gen=str(fleet.gen[order[0]]),
                start_timestep=int(fleet.timestep[order[0]]),
                rows=fleet.features[order],
                labels=None if fleet.risk_level is None else fleet.risk_level[order],
            )
        )
    return out


def _slice(seq: SequenceWindow, end: int, length: int) -> SequenceWindow:
    # end is an absolute timestep, inclusive
    lo = end - length + 1 - seq.start_timestep
    hi = lo + length
    return SequenceWindow(
        chassis_id=seq.chassis_id,
        gen=seq.gen,
        start_timestep=end - length + 1,
        rows=seq.rows[lo:hi],
        labels=None if seq.labels is None else seq.labels[lo:hi],
    )


def extract_test_window(series: SequenceWindow, failure: int | None, rng: np.random.Generator,
                        length: int = WINDOW_LENGTH) -> SequenceWindow:
    """Draw the single evaluation window for one truck.

    Healthy trucks get a uniformly placed window. Failed trucks get a window
    whose last readout is a uniformly drawn High readout with enough history.
    Labels of the returned window are the true risk levels.
    """
    n = len(series)
    if n < length:
        raise ExtractionError(f"chassis {series.chassis_id}: series of {n} readouts is shorter than {length}")
    first, last = series.start_timestep, series.end_timestep
    if failure is None:
        end = int(rng.integers(first + length - 1, last + 1))
    else:
        if failure != last:
            raise ExtractionError(f"chassis {series.chassis_id}: failure {failure} is not the final timestep {last}")
        lo = max(failure - (HIGH_BAND - 1), first + length - 1)
        if lo > failure:
            raise ExtractionError(f"chassis {series.chassis_id}: no High readout has {length - 1} predecessors")
        end = int(rng.integers(lo, failure + 1))
    win = _slice(series, end, length)
    win.labels = risk_codes(win.timesteps, failure)
    return win


def extract_training_windows(fleet: FleetTable, policy: str, rng: np.random.Generator,
                             windows_per_truck: int | None = None,
                             length: int = WINDOW_LENGTH) -> list[SequenceWindow]:
    """Cut labeled training windows out of full training series.

    ``mirror_test`` draws one window per truck exactly as the test set does.
    ``unhealthy_anchored`` samples healthy windows anywhere and unhealthy
    windows ending at or after the first High readout. With
    ``windows_per_truck=None`` it returns every eligible window.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown window policy {policy!r}")
    if not fleet.labeled:
        raise ExtractionError("training windows need a labeled fleet")
    out: list[SequenceWindow] = []
    skipped = 0
    for seq in truck_sequences(fleet):
        if len(seq) < length:
            skipped += 1
            continue
        highs = np.flatnonzero(seq.labels == RiskLabel.HIGH)
        if policy == "mirror_test":
            failure = seq.end_timestep if len(highs) else None
            try:
                out.append(extract_test_window(seq, failure, rng, length))
            except ExtractionError:
                skipped += 1
            continue
        lo = seq.start_timestep + length - 1
        if seq.unhealthy:
            if len(highs) == 0:
                skipped += 1
                continue
            lo = max(lo, seq.start_timestep + int(highs[0]))
        ends = np.arange(lo, seq.end_timestep + 1)
        if len(ends) == 0:
            skipped += 1
            continue
        if windows_per_truck is not None and windows_per_truck < len(ends):
            ends = np.sort(rng.choice(ends, size=windows_per_truck, replace=False))
        out.extend(_slice(seq, int(e), length) for e in ends)
    if skipped:
        logger.info("skipped %d trucks too short for %s windows", skipped, policy)
    if not out:
        raise ExtractionError("no eligible trucks for window extraction")
    return out


def windows_to_table(windows: list[SequenceWindow]) -> FleetTable:
    labeled = all(w.labels is not None for w in windows)
    return FleetTable(
        timestep=np.concatenate([w.timesteps for w in windows]),
        chassis_id=np.concatenate([[w.chassis_id] * len(w) for w in windows]).astype(object),
        gen=np.concatenate([[w.gen] * len(w) for w in windows]).astype(object),
        features=np.vstack([w.rows for w in windows]),
        risk_level=np.concatenate([w.labels for w in windows]) if labeled else None,
    )
