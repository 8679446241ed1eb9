"""Two-phase competition simulation with submission quotas."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

from fleetrisk.schema import ConfigError
from fleetrisk.scoring import AlignmentError, ScoreReport, challenge_score, dev_phase_score

PHASES = ("dev", "final")


class QuotaError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseConfig:
    dev_fraction: float = 0.2
    dev_daily_quota: int = 5
    final_quota: int = 3

    def __post_init__(self) -> None:
        if not 0.0 < self.dev_fraction <= 1.0:
            raise ConfigError("dev_fraction must lie in (0, 1]")
        if self.dev_daily_quota < 1 or self.final_quota < 1:
            raise ConfigError("quotas must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhaseConfig":
        known = {f.name for f in fields(cls)}
        if set(data) - known:
            raise ConfigError(f"unknown phase keys {sorted(set(data) - known)}")
        return cls(**data)


@dataclass
class Submission:
    phase: str
    labels: Sequence[int]
    day: int = 0
    name: str = ""


@dataclass
class Entry:
    phase: str
    index: int
    day: int
    name: str
    report: ScoreReport


@dataclass
class ExperimentRecord:
    entries: list[Entry] = field(default_factory=list)
    best_so_far: dict[str, list[float]] = field(default_factory=lambda: {p: [] for p in PHASES})

    def add(self, entry: Entry) -> None:
        self.entries.append(entry)
        series = self.best_so_far[entry.phase]
        series.append(max(series[-1], entry.report.final) if series else entry.report.final)

    def best(self, phase: str) -> Entry | None:
        pool = [e for e in self.entries if e.phase == phase]
        # earliest submission wins ties
        return max(pool, key=lambda e: (e.report.final, -e.index)) if pool else None

    def to_dict(self) -> dict:
        best = {p: (self.best(p).name if self.best(p) else None) for p in PHASES}
        return {
            "entries": [{"phase": e.phase, "index": e.index, "day": e.day, "name": e.name,
                         "report": e.report.to_dict()} for e in self.entries],
            "best_so_far": self.best_so_far,
            "best": best,
        }


def simulate_phases(truth: Sequence[int], gens: Sequence[str], submissions: Sequence[Submission],
                    cfg: PhaseConfig = PhaseConfig(), seed: int = 0) -> ExperimentRecord:
    """Score submissions in order, enforcing the per-day and final quotas.

    Development submissions are scored on the same seeded subsample of the
    truth; final submissions on all of it.
    """
    record = ExperimentRecord()
    per_day: dict[int, int] = {}
    n_final = 0
    for i, sub in enumerate(submissions):
        if sub.phase not in PHASES:
            raise ValueError(f"unknown phase {sub.phase!r}")
        if len(sub.labels) != len(truth):
            raise AlignmentError(f"submission {i} has {len(sub.labels)} rows, truth has {len(truth)}")
        if sub.phase == "dev":
            per_day[sub.day] = per_day.get(sub.day, 0) + 1
            if per_day[sub.day] > cfg.dev_daily_quota:
                raise QuotaError(f"submission {i}: more than {cfg.dev_daily_quota} development submissions on day {sub.day}")
            report = dev_phase_score(truth, sub.labels, gens, cfg.dev_fraction, seed)
        else:
            n_final += 1
            if n_final > cfg.final_quota:
                raise QuotaError(f"submission {i}: final phase allows only {cfg.final_quota} submissions")
            report = challenge_score(truth, sub.labels, gens)
        record.add(Entry(phase=sub.phase, index=i, day=sub.day, name=sub.name or f"submission-{i}", report=report))
    return record
