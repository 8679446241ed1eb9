"""Desk-scale synthetic fleets with a planted degradation signal.

Failed trucks drift upward on a subset of features as failure approaches,
ramping linearly over the 18 readouts before the failure. Gen2 trucks are
affinely shifted and a few readouts carry low-value outliers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from fleetrisk.labeling import MEDIUM_BAND, WINDOW_LENGTH, ExtractionError, extract_test_window, truck_sequences
from fleetrisk.labeling import label_fleet, windows_to_table
from fleetrisk.rng import substream
from fleetrisk.schema import N_VARIANT_SPECS, ConfigError, FleetTable, VariantsTable

logger = logging.getLogger(__name__)

FailureMap = dict[str, Optional[int]]

# category counts for the 12 encoded spec columns
VARIANT_VOCAB = (2, 3, 4, 5, 2, 3, 4, 6, 2, 3, 5, 4)


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n_trucks: int = 200
    n_features: int = 20
    failure_fraction: float = 0.3
    min_length: int = 20
    max_length: int = 60
    n_signal_features: int = 6
    drift_strength: float = 4.0
    noise_sigma: float = 1.0
    gen2_fraction: float = 0.5
    gen2_shift: float = 3.0
    gen2_scale: float = 1.0
    outlier_rate: float = 0.002
    outlier_magnitude: float = 25.0
    test_gen1_fraction: float = 0.3
    seed: int = 42

    def validate(self) -> None:
        if self.n_trucks < 1 or self.n_features < 1:
            raise ConfigError("n_trucks and n_features must be positive")
        if not 0.0 <= self.failure_fraction <= 1.0:
            raise ConfigError("failure_fraction must lie in [0, 1]")
        if self.min_length < 1 or self.max_length < self.min_length:
            raise ConfigError("need 1 <= min_length <= max_length")
        if self.failure_fraction > 0 and self.min_length < MEDIUM_BAND + 1:
            raise ConfigError(f"min_length must be >= {MEDIUM_BAND + 1} when trucks can fail")
        if not 0 <= self.n_signal_features <= self.n_features:
            raise ConfigError("n_signal_features must lie in [0, n_features]")
        if self.drift_strength < 0:
            raise ConfigError("drift_strength must be >= 0")
        if self.drift_strength > 0 and self.n_signal_features < 1:
            raise ConfigError("a positive drift needs at least one signal feature")
        if self.noise_sigma <= 0 or self.gen2_scale <= 0 or self.outlier_magnitude <= 0:
            raise ConfigError("noise_sigma, gen2_scale and outlier_magnitude must be positive")
        if not 0.0 <= self.gen2_fraction <= 1.0:
            raise ConfigError("gen2_fraction must lie in [0, 1]")
        if not 0.0 <= self.outlier_rate < 1.0:
            raise ConfigError("outlier_rate must lie in [0, 1)")
        if not 0.0 <= self.test_gen1_fraction < 1.0:
            raise ConfigError("test_gen1_fraction must lie in [0, 1)")

    @property
    def n_failed(self) -> int:
        return int(math.floor(self.failure_fraction * self.n_trucks + 0.5))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown generator keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def full_scale(cls, seed: int = 0) -> "GeneratorConfig":
        """Schema-parity sizes: 10,639 trucks in variants, 304 features.

        With 15% gen2 trucks and 19.5% of gen1 held out, the expected train
        table holds about 7,280 trucks and the test about 3,359 (33,590 rows).
        """
        return cls(n_trucks=10639, n_features=304, n_signal_features=40, min_length=19, max_length=40,
                   gen2_fraction=0.15, test_gen1_fraction=0.195, seed=seed)


def chassis_name(index: int) -> str:
    return f"C{index:05d}"


def generate_fleet(config: GeneratorConfig) -> tuple[FleetTable, VariantsTable, FailureMap]:
    config.validate()
    n, F = config.n_trucks, config.n_features
    rng = substream(config.seed, "fleet")
    baseline = rng.uniform(0.0, 10.0, F)
    signal = np.sort(rng.choice(F, size=config.n_signal_features, replace=False))
    failed = np.zeros(n, dtype=bool)
    failed[rng.permutation(n)[: config.n_failed]] = True
    is_gen2 = rng.random(n) < config.gen2_fraction
    specs = np.column_stack([rng.integers(0, v, n) for v in VARIANT_VOCAB])
    assert specs.shape[1] == N_VARIANT_SPECS

    parts: list[FleetTable] = []
    failures: FailureMap = {}
    for i in range(n):
        cid = chassis_name(i)
        trng = substream(config.seed, "truck", i)
        T = int(trng.integers(config.min_length, config.max_length + 1))
        steps = np.arange(1, T + 1)
        x = baseline + config.noise_sigma * trng.standard_normal((T, F))
        if failed[i]:
            ttf = T - steps
            ramp = np.maximum(0.0, 1.0 - ttf / MEDIUM_BAND)
            x[:, signal] += config.drift_strength * ramp[:, None]
            failures[cid] = T
        else:
            failures[cid] = None
        gen = "gen2" if is_gen2[i] else "gen1"
        if is_gen2[i]:
            x = config.gen2_scale * x + config.gen2_shift
        hit = np.flatnonzero(trng.random(T) < config.outlier_rate)
        if len(hit):
            cols = trng.integers(0, F, len(hit))
            x[hit, cols] = baseline[cols] - config.outlier_magnitude
        parts.append(FleetTable(steps, [cid] * T, [gen] * T, x))

    fleet = FleetTable.concat(parts)
    variants = VariantsTable([chassis_name(i) for i in range(n)], specs)
    return fleet, variants, failures


@dataclass(eq=False)
class Split:
    train: FleetTable
    test: FleetTable
    truth: np.ndarray
    skipped: int = 0

    @property
    def truth_gens(self) -> np.ndarray:
        return self.test.gen


def split_train_test(fleet: FleetTable, variants: VariantsTable, failures: FailureMap,
                     config: GeneratorConfig) -> Split:
    """Hold out gen2 trucks and a fraction of gen1 trucks as the test set.

    Train keeps full labeled gen1 series. Each test truck is cut to one
    length-10 window; trucks too short for a window are dropped and counted.
    """
    missing = set(fleet.chassis_id.tolist()) - set(variants.chassis_id.tolist())
    if missing:
        raise SplitError(f"{len(missing)} fleet trucks have no variants row")
    labeled = label_fleet(fleet, failures)
    seqs = truck_sequences(labeled)
    gen1 = [k for k, s in enumerate(seqs) if s.gen == "gen1"]
    if not gen1:
        raise SplitError("no gen1 trucks available for training")
    rng = substream(config.seed, "split")
    n_test_g1 = int(math.floor(config.test_gen1_fraction * len(gen1) + 0.5))
    test_g1 = set(rng.choice(gen1, size=n_test_g1, replace=False).tolist()) if n_test_g1 else set()
    train_idx = [k for k in gen1 if k not in test_g1]
    if not train_idx:
        raise SplitError("split leaves no training trucks")

    windows = []
    skipped = 0
    for k, seq in enumerate(seqs):
        if seq.gen == "gen1" and k not in test_g1:
            continue
        try:
            windows.append(extract_test_window(seq, failures[seq.chassis_id], substream(config.seed, "test-window", k)))
        except ExtractionError:
            skipped += 1
    if skipped:
        logger.info("dropped %d test trucks shorter than %d readouts", skipped, WINDOW_LENGTH)
    if not windows:
        raise SplitError("no test windows could be extracted")

    train = FleetTable.concat([windows_to_table([seqs[k]]) for k in train_idx])
    test_labeled = windows_to_table(windows)
    return Split(train=train, test=test_labeled.with_labels(None), truth=test_labeled.risk_level, skipped=skipped)
