"""Binary health model plus regression of where the Medium-to-High jump sits.

Both models see derivative and db4 wavelet features. The regressor's
sigmoid output is read as the fraction of the window that is still Medium.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from fleetrisk.features import FeatureOptions, build_feature_matrix
from fleetrisk.labeling import extract_training_windows
from fleetrisk.learners import NetScorer, TrainingHyper, fit_binary, fit_sigmoid_regressor
from fleetrisk.rng import substream
from fleetrisk.schema import FleetTable, RiskLabel
from fleetrisk.strategies.base import Strategy, StrategyError, index_windows, scatter
from fleetrisk.strategies.rules import JumpConfig, jump_target, percentile_to_split, split_labels

JUMP_FEATURES = FeatureOptions(include_raw=True, include_derivative=True, include_wavelet=True, wavelet_levels=1)


@dataclass(eq=False)
class JumpEvidence:
    windows: list
    health: np.ndarray
    jump: np.ndarray
    n_rows: int


class JumpStrategy(Strategy):
    name = "jump"
    config_type = JumpConfig

    def __init__(self, cfg: JumpConfig = JumpConfig(), hyper: TrainingHyper = TrainingHyper(),
                 reg_hyper: TrainingHyper | None = None, features: FeatureOptions = JUMP_FEATURES,
                 windows_per_truck: int | None = 5, seed: int = 0):
        super().__init__(cfg, seed)
        self.hyper = replace(hyper, seed=seed)
        self.reg_hyper = replace(reg_hyper or hyper, seed=seed + 1)
        self.features = features
        self.windows_per_truck = windows_per_truck
        self.health_model: NetScorer | None = None
        self.jump_model: NetScorer | None = None

    def _row_features(self, windows) -> np.ndarray:
        return np.vstack([build_feature_matrix(w, self.features)[0] for w in windows])

    def _flat_features(self, windows) -> np.ndarray:
        return np.vstack([build_feature_matrix(w, self.features)[1] for w in windows])

    def fit(self, train: FleetTable) -> "JumpStrategy":
        windows = extract_training_windows(train, "unhealthy_anchored", substream(self.seed, "jump-windows"),
                                           self.windows_per_truck)
        unhealthy = [w for w in windows if w.unhealthy]
        if not unhealthy:
            raise StrategyError("no unhealthy training windows")
        y_rows = np.concatenate([np.full(len(w), float(w.unhealthy)) for w in windows])
        self.health_model = fit_binary(self._row_features(windows), y_rows, self.hyper)
        targets = np.array([jump_target(w.labels) for w in unhealthy])
        self.jump_model = fit_sigmoid_regressor(self._flat_features(unhealthy), targets, self.reg_hyper)
        return self

    def evidence(self, test: FleetTable) -> JumpEvidence:
        if self.health_model is None:
            raise StrategyError("strategy is not fitted")
        windows = index_windows(test)
        wins = [iw.window for iw in windows]
        row_scores = self.health_model.score(self._row_features(wins))
        bounds = np.cumsum([0] + [len(w) for w in wins])
        health = np.array([row_scores[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])])
        jump = np.atleast_1d(self.jump_model.score(self._flat_features(wins)))
        return JumpEvidence(windows=windows, health=health, jump=jump, n_rows=len(test))

    def decide(self, evidence: JumpEvidence, cfg: JumpConfig | None = None) -> np.ndarray:
        cfg = cfg or self.cfg
        out = []
        for iw, health, p in zip(evidence.windows, evidence.health, evidence.jump):
            n = len(iw.rows)
            if health > cfg.healthy_threshold:
                out.append(split_labels(percentile_to_split(float(p), n), n))
            else:
                out.append([RiskLabel.LOW] * n)
        return scatter(evidence.windows, out, evidence.n_rows)


def jump_predict(train: FleetTable, test: FleetTable, hyper: TrainingHyper, cfg: JumpConfig,
                 seed: int = 0) -> np.ndarray:
    return JumpStrategy(cfg, hyper, seed=seed).fit(train).predict(test)
