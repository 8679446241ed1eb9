from __future__ import annotations

import numpy as np
import pytest

from fleetrisk.schema import FleetTable
from fleetrisk.synthetic import GeneratorConfig, generate_fleet, split_train_test

SMALL = GeneratorConfig(n_trucks=40, n_features=5, n_signal_features=2, min_length=20, max_length=30, seed=7)


@pytest.fixture(scope="session")
def small_fleet():
    return generate_fleet(SMALL)


@pytest.fixture(scope="session")
def small_split(small_fleet):
    fleet, variants, failures = small_fleet
    return split_train_test(fleet, variants, failures, SMALL)


@pytest.fixture(scope="session")
def reference_split():
    cfg = GeneratorConfig()
    fleet, variants, failures = generate_fleet(cfg)
    return split_train_test(fleet, variants, failures, cfg), failures


def make_table(lengths, n_features=4, labeled=True, seed=0, gen="gen1") -> FleetTable:
    rng = np.random.default_rng(seed)
    steps, ids = [], []
    for k, n in enumerate(lengths):
        steps.extend(range(1, n + 1))
        ids.extend([f"T{k}"] * n)
    n = len(steps)
    return FleetTable(
        timestep=np.asarray(steps),
        chassis_id=ids,
        gen=[gen] * n,
        features=rng.normal(size=(n, n_features)),
        risk_level=rng.integers(0, 3, n) if labeled else None,
    )


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
