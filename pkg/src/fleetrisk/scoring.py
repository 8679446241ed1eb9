"""Challenge metric: macro-F1 over Low/Medium/High, per generation.

Per-class F1 is 0 whenever it would be 0/0, and all three classes always
stay in the average, including classes absent from both truth and
prediction. The final score is the mean of the gen1 and gen2 macro-F1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fleetrisk.rng import substream
from fleetrisk.schema import GENS, RiskLabel

N_CLASSES = 3


class AlignmentError(ValueError):
    pass


class DegenerateSubsampleError(ValueError):
    pass


def _codes(labels: Sequence) -> np.ndarray:
    arr = np.asarray([int(v) for v in labels], dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= N_CLASSES):
        raise ValueError("labels must be RiskLabel codes 0..2")
    return arr


def confusion_counts(y_true: Sequence, y_pred: Sequence) -> np.ndarray:
    """3x3 counts indexed (true, predicted) in Low, Medium, High order."""
    t, p = _codes(y_true), _codes(y_pred)
    if len(t) != len(p):
        raise AlignmentError(f"truth has {len(t)} rows but prediction has {len(p)}")
    if len(t) == 0:
        raise AlignmentError("cannot score zero rows")
    return np.bincount(t * N_CLASSES + p, minlength=N_CLASSES * N_CLASSES).reshape(N_CLASSES, N_CLASSES)


def per_class_f1(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    out = np.zeros(N_CLASSES)
    np.divide(2 * tp, denom, out=out, where=denom > 0)
    return out


def macro_f1(counts: np.ndarray) -> float:
    return float(per_class_f1(counts).mean())


@dataclass
class GenScore:
    per_class_f1: tuple[float, float, float]
    macro_f1: float
    n_rows: int


@dataclass
class ScoreReport:
    per_gen: dict[str, GenScore] = field(default_factory=dict)
    final: float = 0.0
    partial: bool = False

    def as_record(self) -> str:
        parts = [f"{g}={self.per_gen[g].macro_f1:.6f}" if g in self.per_gen else f"{g}=NA" for g in GENS]
        return " ".join(parts + [f"final={self.final:.6f}"])

    def as_text(self) -> str:
        lines = []
        for g in GENS:
            if g not in self.per_gen:
                lines.append(f"{g}: absent")
                continue
            s = self.per_gen[g]
            low, med, high = s.per_class_f1
            lines.append(f"{g}: macro-F1 {s.macro_f1:.4f} over {s.n_rows} rows "
                         f"(Low {low:.4f}, Medium {med:.4f}, High {high:.4f})")
        note = " (single generation present)" if self.partial else ""
        lines.append(f"final: {self.final:.4f}{note}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "per_gen": {g: {"per_class_f1": list(s.per_class_f1), "macro_f1": s.macro_f1, "n_rows": s.n_rows}
                        for g, s in self.per_gen.items()},
            "final": self.final,
            "partial": self.partial,
        }


def challenge_score(y_true: Sequence, y_pred: Sequence, gens: Sequence[str]) -> ScoreReport:
    t, p = _codes(y_true), _codes(y_pred)
    g = np.asarray(gens, dtype=object)
    if not (len(t) == len(p) == len(g)):
        raise AlignmentError(f"truth, prediction and gen lengths differ: {len(t)}, {len(p)}, {len(g)}")
    if len(t) == 0:
        raise AlignmentError("cannot score zero rows")
    unknown = set(g.tolist()) - set(GENS)
    if unknown:
        raise AlignmentError(f"unknown generation tags {sorted(unknown)}")
    report = ScoreReport()
    for gen in GENS:
        mask = g == gen
        if not mask.any():
            continue
        f1 = per_class_f1(confusion_counts(t[mask], p[mask]))
        report.per_gen[gen] = GenScore(tuple(float(v) for v in f1), float(f1.mean()), int(mask.sum()))
    macros = [s.macro_f1 for s in report.per_gen.values()]
    report.final = float(sum(macros) / len(macros))
    report.partial = len(macros) < len(GENS)
    return report


def _apportion(sizes: list[int], total: int) -> list[int]:
    # largest-remainder allocation of `total` proportional to sizes
    n = sum(sizes)
    raw = [total * s / n for s in sizes]
    alloc = [math.floor(r) for r in raw]
    order = sorted(range(len(sizes)), key=lambda k: (-(raw[k] - alloc[k]), k))
    for k in order[: total - sum(alloc)]:
        alloc[k] += 1
    return alloc


def dev_phase_score(y_true: Sequence, y_pred: Sequence, gens: Sequence[str], fraction: float = 0.2,
                    seed: int = 0) -> ScoreReport:
    """Score on a seeded row subsample, stratified by generation."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    t, p = _codes(y_true), _codes(y_pred)
    g = np.asarray(gens, dtype=object)
    if not (len(t) == len(p) == len(g)) or len(t) == 0:
        raise AlignmentError("truth, prediction and gens must be aligned and non-empty")
    if fraction == 1.0:
        return challenge_score(t, p, g)
    present = [gen for gen in GENS if np.any(g == gen)]
    pools = [np.flatnonzero(g == gen) for gen in present]
    sizes = _apportion([len(pool) for pool in pools], int(math.floor(fraction * len(t) + 0.5)))
    rng = substream(seed, "dev-phase")
    picked = []
    for gen, pool, m in zip(present, pools, sizes):
        if m == 0:
            raise DegenerateSubsampleError(f"subsample of fraction {fraction} leaves no {gen} rows")
        picked.append(np.sort(rng.choice(pool, size=m, replace=False)))
    idx = np.sort(np.concatenate(picked))
    return challenge_score(t[idx], p[idx], g[idx])


def label_codes(labels: Sequence[RiskLabel]) -> np.ndarray:
    return _codes(labels)
