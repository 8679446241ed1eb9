"""Prediction strategies and the registry used by the harness and CLI."""

from __future__ import annotations

from typing import Mapping

from fleetrisk.features import DEFAULT_Q, normalize_test_table, quantile_shift_normalize
from fleetrisk.learners import TrainingHyper
from fleetrisk.schema import ConfigError, FleetTable
from fleetrisk.strategies.base import Strategy, StrategyError
from fleetrisk.strategies.calibrate import calibrate_thresholds, grid_points
from fleetrisk.strategies.jump import JumpStrategy
from fleetrisk.strategies.pseudolabel import PseudoLabelStrategy
from fleetrisk.strategies.reference import OracleStrategy, TreeBaselineStrategy, TreeConfig
from fleetrisk.strategies.rules import JumpConfig, PseudoLabelConfig, TwoStepConfig
from fleetrisk.strategies.twostep import TwoStepStrategy

STRATEGIES = ("twostep", "jump", "pseudolabel", "tree-baseline")

# per-strategy defaults: threshold config, learner hyperparameters, extra options, calibration grid
DEFAULTS: dict[str, dict] = {
    "twostep": {
        "params": {},
        "hyper": {"hidden_sizes": [16], "epochs": 300, "learning_rate": 0.5, "l2": 1e-3, "dropout_rate": 0.1},
        "options": {"n_models": 5, "n_draws": 20},
        "normalize": True,
        "grid": {
            "t_min": [0.3, 0.5, 0.7, 1.01],
            "t_mean": [0.3, 0.5, 0.7, 1.01],
            "t_max": [0.5, 0.7, 0.9, 1.01],
            "aux_lo": [0.1, 0.2, 0.3, 0.4],
            "aux_hi": [0.4, 0.5, 0.6, 0.7, 0.8],
            "boundary_shift_limit": [0, 1, 2, 3],
        },
    },
    "jump": {
        "params": {},
        "hyper": {"hidden_sizes": [], "epochs": 300, "learning_rate": 0.5, "l2": 1e-2},
        "options": {"windows_per_truck": 5},
        "normalize": True,
        "grid": {"healthy_threshold": [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]},
    },
    "pseudolabel": {
        "params": {},
        "hyper": {"epochs": 300, "learning_rate": 0.5, "l2": 1e-3},
        "options": {"mirror_draws": 5},
        "normalize": True,
        "grid": {},
    },
    "tree-baseline": {
        "params": {},
        "hyper": {},
        "options": {},
        "normalize": False,
        "grid": {"depth": [3, 5, 7]},
    },
}

_CONFIG_TYPES = {"twostep": TwoStepConfig, "jump": JumpConfig, "pseudolabel": PseudoLabelConfig,
                 "tree-baseline": TreeConfig}


def merged_spec(name: str, spec: Mapping | None = None) -> dict:
    if name not in DEFAULTS:
        raise ConfigError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    spec = dict(spec or {})
    unknown = set(spec) - set(DEFAULTS[name]) - {"name"}
    if unknown:
        raise ConfigError(f"unknown keys for strategy {name}: {sorted(unknown)}")
    out = {}
    for key, default in DEFAULTS[name].items():
        value = spec.get(key, default)
        out[key] = {**default, **value} if isinstance(default, dict) and key != "grid" else value
    out["name"] = name
    return out


def build_strategy(name: str, spec: Mapping | None = None, seed: int = 0, failures=None) -> Strategy:
    """Instantiate a registered strategy from a (partial) config mapping."""
    if name == "oracle":
        if failures is None:
            raise ConfigError("the oracle strategy needs a failure map")
        return OracleStrategy(failures, seed=seed)
    spec = merged_spec(name, spec)
    cfg = _CONFIG_TYPES[name].from_dict(spec["params"])
    hyper = TrainingHyper.from_dict(spec["hyper"]) if spec["hyper"] else TrainingHyper()
    opts = spec["options"]
    if name == "twostep":
        return TwoStepStrategy(cfg, hyper, n_models=opts["n_models"], n_draws=opts["n_draws"], seed=seed)
    if name == "jump":
        return JumpStrategy(cfg, hyper, windows_per_truck=opts["windows_per_truck"], seed=seed)
    if name == "pseudolabel":
        return PseudoLabelStrategy(cfg, hyper, mirror_draws=opts["mirror_draws"], seed=seed)
    return TreeBaselineStrategy(cfg, seed=seed)


def normalize_train(train: FleetTable, q: float = DEFAULT_Q) -> FleetTable:
    return quantile_shift_normalize(train, q, "train")


def normalize_test(test: FleetTable, q: float = DEFAULT_Q) -> FleetTable:
    return normalize_test_table(test, q)


__all__ = [
    "DEFAULTS", "STRATEGIES", "JumpConfig", "JumpStrategy", "OracleStrategy", "PseudoLabelConfig",
    "PseudoLabelStrategy", "Strategy", "StrategyError", "TreeBaselineStrategy", "TreeConfig", "TwoStepConfig",
    "TwoStepStrategy", "build_strategy", "calibrate_thresholds", "grid_points", "merged_spec",
    "normalize_test", "normalize_train",
]
