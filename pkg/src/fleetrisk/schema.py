"""Core table types shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np


class SchemaError(ValueError):
    """Raised when a table's columns or invariants are violated."""


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


class LabelError(ValueError):
    """Raised for risk strings outside {"Low", "Medium", "High"}."""


class RiskLabel(IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2

    def __str__(self) -> str:
        return _LABEL_TEXT[self]

    @classmethod
    def parse(cls, text: str) -> "RiskLabel":
        try:
            return _TEXT_LABEL[text]
        except KeyError:
            raise LabelError(f"invalid risk label {text!r}; expected one of Low, Medium, High") from None


_LABEL_TEXT = {RiskLabel.LOW: "Low", RiskLabel.MEDIUM: "Medium", RiskLabel.HIGH: "High"}
_TEXT_LABEL = {v: k for k, v in _LABEL_TEXT.items()}

GENS = ("gen1", "gen2")
FEATURE_PREFIX = "af__"
N_VARIANT_SPECS = 12


def feature_names(n_features: int) -> list[str]:
    return [f"{FEATURE_PREFIX}{k}" for k in range(n_features)]


@dataclass(eq=False)
class FleetTable:
    """Long-format readouts, one row per (truck, timestep).

    ``risk_level`` holds integer codes of :class:`RiskLabel` or is ``None``
    for unlabeled (test) tables.
    """

    timestep: np.ndarray
    chassis_id: np.ndarray
    gen: np.ndarray
    features: np.ndarray
    risk_level: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.timestep = np.asarray(self.timestep, dtype=np.int64)
        self.chassis_id = np.asarray(self.chassis_id, dtype=object)
        self.gen = np.asarray(self.gen, dtype=object)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise SchemaError("features must be a 2-D array (rows x F)")
        if self.risk_level is not None:
            self.risk_level = np.asarray(self.risk_level, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.timestep)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def labeled(self) -> bool:
        return self.risk_level is not None

    def validate(self, from_one: bool | None = None) -> None:
        """Check column lengths, labels, gens and timestep continuity.

        Full series (``from_one``, default for labeled tables) must start at
        timestep 1; test windows only need consecutive timesteps.
        """
        if from_one is None:
            from_one = self.labeled
        n = len(self.timestep)
        for name in ("chassis_id", "gen"):
            if len(getattr(self, name)) != n:
                raise SchemaError(f"column {name} has {len(getattr(self, name))} rows, expected {n}")
        if self.features.shape[0] != n:
            raise SchemaError(f"feature block has {self.features.shape[0]} rows, expected {n}")
        if self.risk_level is not None:
            if len(self.risk_level) != n:
                raise SchemaError(f"column risk_level has {len(self.risk_level)} rows, expected {n}")
            if n and (self.risk_level.min() < 0 or self.risk_level.max() > 2):
                raise LabelError("risk_level codes must be 0, 1 or 2")
        bad_gen = set(self.gen.tolist()) - set(GENS)
        if bad_gen:
            raise SchemaError(f"unknown gen values {sorted(bad_gen)}")
        if not np.all(np.isfinite(self.features)):
            raise SchemaError("features must be finite")
        for cid, idx in self.groups().items():
            steps = self.timestep[idx]
            start = 1 if from_one else steps[0]
            expected = np.arange(start, start + len(steps))
            if not np.array_equal(steps, expected):
                pos = int(np.argmax(steps != expected))
                raise SchemaError(
                    f"chassis {cid}: timesteps must be consecutive"
                    f"{' from 1' if from_one else ''}; found {steps[pos]} where {expected[pos]} was expected"
                )

    def groups(self) -> dict[str, np.ndarray]:
        """Row indices per chassis, in order of first appearance."""
        out: dict[str, list[int]] = {}
        for i, cid in enumerate(self.chassis_id):
            out.setdefault(cid, []).append(i)
        return {k: np.asarray(v, dtype=np.int64) for k, v in out.items()}

    def take(self, idx: Sequence[int] | np.ndarray) -> "FleetTable":
        idx = np.asarray(idx, dtype=np.int64)
        return FleetTable(
            timestep=self.timestep[idx],
            chassis_id=self.chassis_id[idx],
            gen=self.gen[idx],
            features=self.features[idx],
            risk_level=None if self.risk_level is None else self.risk_level[idx],
        )

    def with_features(self, features: np.ndarray) -> "FleetTable":
        return FleetTable(self.timestep, self.chassis_id, self.gen, features, self.risk_level)

    def with_labels(self, risk_level: np.ndarray | None) -> "FleetTable":
        return FleetTable(self.timestep, self.chassis_id, self.gen, self.features, risk_level)

    def labels(self) -> list[RiskLabel]:
        if self.risk_level is None:
            raise SchemaError("table carries no risk_level column")
        return [RiskLabel(int(c)) for c in self.risk_level]

    def equals(self, other: "FleetTable") -> bool:
        if (self.risk_level is None) != (other.risk_level is None):
            return False
        same = (
            np.array_equal(self.timestep, other.timestep)
            and np.array_equal(self.chassis_id, other.chassis_id)
            and np.array_equal(self.gen, other.gen)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )
        if same and self.risk_level is not None:
            same = np.array_equal(self.risk_level, other.risk_level)
        return bool(same)

    @classmethod
    def empty(cls, n_features: int, labeled: bool = False) -> "FleetTable":
        return cls(
            timestep=np.zeros(0, dtype=np.int64),
            chassis_id=np.zeros(0, dtype=object),
            gen=np.zeros(0, dtype=object),
            features=np.zeros((0, n_features)),
            risk_level=np.zeros(0, dtype=np.int64) if labeled else None,
        )

    @classmethod
    def concat(cls, tables: Iterable["FleetTable"]) -> "FleetTable":
        tables = list(tables)
        if not tables:
            raise SchemaError("nothing to concatenate")
        labeled = {t.labeled for t in tables}
        if len(labeled) != 1:
            raise SchemaError("cannot mix labeled and unlabeled tables")
        return cls(
            timestep=np.concatenate([t.timestep for t in tables]),
            chassis_id=np.concatenate([t.chassis_id for t in tables]),
            gen=np.concatenate([t.gen for t in tables]),
            features=np.vstack([t.features for t in tables]),
            risk_level=np.concatenate([t.risk_level for t in tables]) if labeled.pop() else None,
        )


@dataclass(eq=False)
class VariantsTable:
    chassis_id: np.ndarray
    specs: np.ndarray = field(default_factory=lambda: np.zeros((0, N_VARIANT_SPECS), dtype=np.int64))

    def __post_init__(self) -> None:
        self.chassis_id = np.asarray(self.chassis_id, dtype=object)
        self.specs = np.asarray(self.specs, dtype=np.int64).reshape(-1, N_VARIANT_SPECS)

    def __len__(self) -> int:
        return len(self.chassis_id)

    def validate(self) -> None:
        if self.specs.shape != (len(self.chassis_id), N_VARIANT_SPECS):
            raise SchemaError(f"variants need {N_VARIANT_SPECS} spec columns per chassis")
        seen: set[str] = set()
        for cid in self.chassis_id:
            if cid in seen:
                raise SchemaError(f"duplicate chassis_id {cid!r} in variants")
            seen.add(cid)

    def lookup(self, chassis_id: str) -> np.ndarray:
        hits = np.flatnonzero(self.chassis_id == chassis_id)
        if len(hits) != 1:
            raise KeyError(chassis_id)
        return self.specs[hits[0]]

    def equals(self, other: "VariantsTable") -> bool:
        return bool(np.array_equal(self.chassis_id, other.chassis_id) and np.array_equal(self.specs, other.specs))
