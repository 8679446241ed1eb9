from __future__ import annotations

import numpy as np
import pytest

from fleetrisk.schema import ConfigError, FleetTable
from fleetrisk.strategies import (DEFAULTS, JumpConfig, TwoStepConfig, build_strategy, calibrate_thresholds,
                                  grid_points, merged_spec, normalize_test, normalize_train)
from fleetrisk.strategies.base import index_windows
from fleetrisk.strategies.pseudolabel import PseudoLabelStrategy
from fleetrisk.strategies.rules import PseudoLabelConfig, is_single_jump
from fleetrisk.learners import TrainingHyper

FAST = {
    "twostep": {"hyper": {"epochs": 60}, "options": {"n_models": 2, "n_draws": 3}},
    "jump": {"hyper": {"epochs": 80}},
    "pseudolabel": {"hyper": {"epochs": 60}, "options": {"mirror_draws": 2}},
    "tree-baseline": {},
}


@pytest.fixture(scope="module")
def prepared(small_split):
    return normalize_train(small_split.train), normalize_test(small_split.test), small_split


@pytest.fixture(scope="module")
def fitted(prepared):
    train, _, _ = prepared
    return {name: build_strategy(name, spec, seed=1).fit(train) for name, spec in FAST.items()}


@pytest.mark.parametrize("name", list(FAST))
def test_one_label_per_row(fitted, prepared, name):
    _, test, _ = prepared
    pred = fitted[name].predict(test)
    assert pred.shape == (len(test),)
    assert set(np.unique(pred).tolist()) <= {0, 1, 2}


@pytest.mark.parametrize("name", ["twostep", "jump"])
def test_single_jump_outputs(fitted, prepared, name):
    _, test, _ = prepared
    pred = fitted[name].predict(test)
    for iw in index_windows(test):
        assert is_single_jump(pred[iw.rows])


def test_pseudolabel_monotone(fitted, prepared):
    _, test, _ = prepared
    pred = fitted["pseudolabel"].predict(test)
    for iw in index_windows(test):
        assert np.all(np.diff(pred[iw.rows]) >= 0)


def test_healthy_sequences_all_low(fitted, prepared):
    _, test, _ = prepared
    st = fitted["twostep"]
    ev = st.evidence(test)
    everything_healthy = TwoStepConfig(t_min=1.01, t_mean=1.01, t_max=1.01)
    assert np.all(st.decide(ev, everything_healthy) == 0)
    jump = fitted["jump"]
    assert np.all(jump.decide(jump.evidence(test), JumpConfig(healthy_threshold=1.0)) == 0)


def test_nothing_healthy_gives_baseline(fitted, prepared):
    _, test, _ = prepared
    st = fitted["twostep"]
    cfg = TwoStepConfig(t_min=0.0, t_mean=0.0, t_max=0.0, aux_lo=0.0, aux_hi=1.0, boundary_shift_limit=0)
    ev = st.evidence(test)
    pred = st.decide(ev, cfg)
    for iw in ev.windows:
        assert pred[iw.rows].tolist() == [1] * 3 + [2] * 7


def test_row_order_independent(fitted, prepared):
    _, test, _ = prepared
    perm = np.random.default_rng(0).permutation(len(test))
    shuffled = test.take(perm)
    for name in ("twostep", "jump", "tree-baseline"):
        assert np.array_equal(fitted[name].predict(shuffled), fitted[name].predict(test)[perm])


def test_deterministic_given_seed(prepared):
    train, test, _ = prepared
    a = build_strategy("jump", FAST["jump"], seed=5).fit(train).predict(test)
    b = build_strategy("jump", FAST["jump"], seed=5).fit(train).predict(test)
    assert np.array_equal(a, b)


def test_pseudolabel_single_iteration_is_plain(prepared):
    train, test, _ = prepared
    cfg = PseudoLabelConfig(n_iterations=1, capacity_schedule=((),), confidence_fraction=0.5)
    pred = PseudoLabelStrategy(cfg, TrainingHyper(epochs=60), mirror_draws=2, seed=2).fit(train).predict(test)
    for iw in index_windows(test):
        assert np.all(np.diff(pred[iw.rows]) >= 0)


def test_pseudolabel_zero_selection_is_config_error(prepared):
    train, test, _ = prepared
    cfg = PseudoLabelConfig(confidence_fraction=1e-6)
    st = PseudoLabelStrategy(cfg, TrainingHyper(epochs=20), mirror_draws=1).fit(train)
    with pytest.raises(ConfigError):
        st.predict(test)


def test_oracle_is_perfect(small_split, small_fleet):
    pred = build_strategy("oracle", failures=small_fleet[2]).predict(small_split.test)
    assert np.array_equal(pred, small_split.truth)
    with pytest.raises(ConfigError):
        build_strategy("oracle")


def test_registry_specs():
    with pytest.raises(ConfigError):
        merged_spec("lstm")
    with pytest.raises(ConfigError):
        merged_spec("jump", {"hyperparams": {}})
    spec = merged_spec("twostep", {"hyper": {"epochs": 5}})
    assert spec["hyper"]["epochs"] == 5 and spec["hyper"]["hidden_sizes"] == DEFAULTS["twostep"]["hyper"]["hidden_sizes"]


def test_grid_points_order_and_errors():
    pts = grid_points({"b": [2, 1], "a": [0.5, 0.1]})
    assert pts[0] == {"a": 0.1, "b": 1} and len(pts) == 4
    with pytest.raises(ConfigError):
        grid_points({})


def test_calibration_single_and_dominant(fitted, prepared):
    _, test, split = prepared
    st = fitted["jump"]
    cfg, _ = calibrate_thresholds(st, test, split.truth, {"healthy_threshold": [0.37]})
    assert cfg.healthy_threshold == 0.37
    # threshold 1.0 labels everything Low, which is dominated on a split with failures
    cfg, score = calibrate_thresholds(st, test, split.truth, {"healthy_threshold": [1.0, 0.5]})
    assert cfg.healthy_threshold == 0.5
    again = calibrate_thresholds(st, test, split.truth, {"healthy_threshold": [1.0, 0.5]})
    assert again == (cfg, score)


def test_calibration_tie_keeps_smallest(fitted, prepared):
    _, test, split = prepared
    st = fitted["jump"]
    # both thresholds above every score give identical all-Low output
    cfg, _ = calibrate_thresholds(st, test, split.truth, {"healthy_threshold": [1.0, 0.999999]})
    assert cfg.healthy_threshold == 0.999999


def test_unfitted_strategy_errors(prepared):
    _, test, _ = prepared
    for name in ("twostep", "jump", "pseudolabel", "tree-baseline"):
        with pytest.raises(ValueError):
            build_strategy(name).predict(test)
