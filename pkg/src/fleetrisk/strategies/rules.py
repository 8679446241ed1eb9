"""Sequence-level decision and post-processing rules shared by the strategies."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Sequence

import numpy as np

from fleetrisk.schema import RiskLabel

L, M, H = RiskLabel.LOW, RiskLabel.MEDIUM, RiskLabel.HIGH


class TargetError(ValueError):
    pass


class Health(Enum):
    HEALTHY = "Healthy"
    NON_HEALTHY = "NonHealthy"


class _Config:
    @classmethod
    def from_dict(cls, data: dict):
        known = {f.name for f in fields(cls)}
        if set(data) - known:
            raise ValueError(f"unknown {cls.__name__} keys {sorted(set(data) - known)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TwoStepConfig(_Config):
    t_min: float = 0.5
    t_mean: float = 0.5
    t_max: float = 0.5
    aux_lo: float = 0.2
    aux_hi: float = 0.6
    boundary_shift_limit: int = 2

    def __post_init__(self) -> None:
        if self.aux_lo > self.aux_hi:
            raise ValueError("aux_lo must not exceed aux_hi")
        if self.boundary_shift_limit < 0:
            raise ValueError("boundary_shift_limit must be >= 0")


@dataclass(frozen=True)
class JumpConfig(_Config):
    healthy_threshold: float = 0.5


@dataclass(frozen=True)
class PseudoLabelConfig(_Config):
    n_iterations: int = 3
    capacity_schedule: tuple[tuple[int, ...], ...] = ((), (8,), (16,))
    confidence_fraction: float = 0.5
    prioritize_gen2: bool = True

    def __post_init__(self) -> None:
        sched = tuple(tuple(int(h) for h in hs) for hs in self.capacity_schedule)
        object.__setattr__(self, "capacity_schedule", sched)
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be positive")
        if len(sched) != self.n_iterations:
            raise ValueError("capacity_schedule needs one entry per iteration")
        sizes = [sum(hs) for hs in sched]
        if any(b < a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("capacity_schedule must not shrink")
        if not 0.0 < self.confidence_fraction <= 1.0:
            raise ValueError("confidence_fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["capacity_schedule"] = [list(hs) for hs in self.capacity_schedule]
        return d


def healthy_decision(row_scores, cfg: TwoStepConfig) -> Health:
    """Scores are per-row probabilities of being non-healthy."""
    s = np.asarray(row_scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty score sequence")
    if s.min() < cfg.t_min and s.mean() < cfg.t_mean and s.max() < cfg.t_max:
        return Health.HEALTHY
    return Health.NON_HEALTHY


def split_labels(n_medium: int, length: int) -> list[RiskLabel]:
    n_medium = min(max(n_medium, 0), length)
    return [M] * n_medium + [H] * (length - n_medium)


def baseline_73(seq_len: int) -> list[RiskLabel]:
    if seq_len < 1:
        raise ValueError("sequence length must be positive")
    return split_labels(seq_len - min(7, seq_len), seq_len)


def adjust_with_aux(baseline: Sequence[RiskLabel], aux_max: float, cfg: TwoStepConfig) -> list[RiskLabel]:
    """Move the Medium/High boundary by the configured shift.

    A confident "very high" signal moves the jump earlier (more High), a
    weak one moves it later; scores inside [aux_lo, aux_hi] keep it.
    """
    n_medium = sum(1 for lab in baseline if lab == M)
    if aux_max >= cfg.aux_hi:
        n_medium -= cfg.boundary_shift_limit
    elif aux_max <= cfg.aux_lo:
        n_medium += cfg.boundary_shift_limit
    return split_labels(n_medium, len(baseline))


def percentile_to_split(p: float, length: int) -> int:
    """Number of leading Medium readouts for a jump at percentile ``p``."""
    if length < 1:
        raise ValueError("sequence length must be positive")
    # the tolerance keeps k/L -> k exact despite rounding (15/22 * 22 is just below 15)
    return min(max(int(math.floor(p * length + 1e-9)), 0), length)


def jump_target(labels: Sequence[RiskLabel]) -> float:
    labs = [RiskLabel(int(v)) for v in labels]
    if not labs:
        raise TargetError("empty window")
    if L in labs:
        raise TargetError("jump targets are defined for windows without Low readouts")
    n_medium = sum(1 for v in labs if v == M)
    if labs != split_labels(n_medium, len(labs)):
        raise TargetError("window must be Mediums followed by Highs with a single jump")
    return n_medium / len(labs)


def enforce_monotonic_risk(labels: Sequence[RiskLabel]) -> list[RiskLabel]:
    """Running maximum in Low < Medium < High order."""
    if len(labels) == 0:
        raise ValueError("empty label sequence")
    out, top = [], L
    for lab in labels:
        top = max(top, RiskLabel(int(lab)))
        out.append(top)
    return out


def majority_vote(votes: Sequence[RiskLabel]) -> RiskLabel:
    """Most common label; ties resolve to the higher risk."""
    if len(votes) == 0:
        raise ValueError("no votes")
    counts = Counter(RiskLabel(int(v)) for v in votes)
    return max(counts, key=lambda lab: (counts[lab], lab))


def is_single_jump(labels: Sequence[RiskLabel]) -> bool:
    """True for all-Low sequences or Mediums followed by Highs."""
    labs = [RiskLabel(int(v)) for v in labels]
    if all(v == L for v in labs):
        return True
    if L in labs:
        return False
    return labs == split_labels(sum(1 for v in labs if v == M), len(labs))
