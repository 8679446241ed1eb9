"""Self-training with growing model capacity and a majority-vote ensemble."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from fleetrisk.features import FeatureOptions, build_feature_matrix
from fleetrisk.labeling import extract_training_windows
from fleetrisk.learners import NetScorer, TrainingHyper, fit_binary
from fleetrisk.rng import substream
from fleetrisk.schema import ConfigError, FleetTable
from fleetrisk.strategies.base import Strategy, StrategyError, index_windows, scatter
from fleetrisk.strategies.rules import PseudoLabelConfig, enforce_monotonic_risk, majority_vote

ROW_FEATURES = FeatureOptions(include_raw=True, include_derivative=True)


@dataclass(eq=False)
class OneVsRest:
    """Three binary scorers composed into normalised class probabilities."""

    members: list[NetScorer]

    def proba(self, X) -> np.ndarray:
        s = np.column_stack([m.score(X) for m in self.members])
        s = np.clip(s, 1e-12, None)
        return s / s.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        p = self.proba(X)
        # ties go to the higher-risk class
        return 2 - np.argmax(p[:, ::-1], axis=1)


def fit_one_vs_rest(X, y, hyper: TrainingHyper) -> OneVsRest:
    y = np.asarray(y)
    if len(np.unique(y)) < 3:
        raise StrategyError("one-vs-rest training needs all three risk classes")
    return OneVsRest([fit_binary(X, (y == c).astype(float), replace(hyper, seed=hyper.seed + c)) for c in range(3)])


class PseudoLabelStrategy(Strategy):
    name = "pseudolabel"
    config_type = PseudoLabelConfig

    def __init__(self, cfg: PseudoLabelConfig = PseudoLabelConfig(), hyper: TrainingHyper = TrainingHyper(),
                 features: FeatureOptions = ROW_FEATURES, mirror_draws: int = 5, seed: int = 0):
        super().__init__(cfg, seed)
        self.hyper = hyper
        self.features = features
        self.mirror_draws = mirror_draws
        self.train_X: np.ndarray | None = None
        self.train_y: np.ndarray | None = None

    def _rows(self, windows) -> np.ndarray:
        return np.vstack([build_feature_matrix(w, self.features)[0] for w in windows])

    def fit(self, train: FleetTable) -> "PseudoLabelStrategy":
        # repeated test-style draws so the training windows mirror the test set
        windows = []
        for d in range(self.mirror_draws):
            windows.extend(extract_training_windows(train, "mirror_test", substream(self.seed, "mirror", d)))
        self.train_X = self._rows(windows)
        self.train_y = np.concatenate([w.labels for w in windows])
        return self

    def evidence(self, test: FleetTable):
        if self.train_X is None:
            raise StrategyError("strategy is not fitted")
        windows = index_windows(test)
        return windows, self._rows([iw.window for iw in windows]), len(test)

    def decide(self, evidence, cfg: PseudoLabelConfig | None = None) -> np.ndarray:
        cfg = cfg or self.cfg
        windows, X_test, n_rows = evidence
        n_sel = int(math.floor(cfg.confidence_fraction * len(windows) + 0.5))
        if n_sel == 0:
            raise ConfigError("confidence_fraction selects no test sequences")
        bounds = np.cumsum([0] + [len(iw.rows) for iw in windows])
        spans = list(zip(bounds[:-1], bounds[1:]))
        is_gen2 = np.array([iw.window.gen == "gen2" for iw in windows])

        pseudo: dict[int, np.ndarray] = {}
        votes = []
        for it, hidden in enumerate(cfg.capacity_schedule):
            if pseudo:
                picked = sorted(pseudo)
                X = np.vstack([self.train_X] + [X_test[spans[k][0]:spans[k][1]] for k in picked])
                y = np.concatenate([self.train_y] + [pseudo[k] for k in picked])
            else:
                X, y = self.train_X, self.train_y
            model = fit_one_vs_rest(X, y, replace(self.hyper, hidden_sizes=hidden, seed=self.seed + 10 * it))
            proba = model.proba(X_test)
            pred = 2 - np.argmax(proba[:, ::-1], axis=1)
            votes.append(pred)
            if it == cfg.n_iterations - 1:
                break
            conf = np.array([proba[a:b].max(axis=1).mean() for a, b in spans])
            order = sorted(range(len(windows)),
                           key=lambda k: ((not is_gen2[k]) if cfg.prioritize_gen2 else False, -conf[k], k))
            for k in order[:n_sel]:
                a, b = spans[k]
                pseudo[k] = pred[a:b]

        stacked = np.vstack(votes)
        final = np.array([majority_vote(stacked[:, r]) for r in range(stacked.shape[1])])
        out = [enforce_monotonic_risk(final[a:b]) for a, b in spans]
        return scatter(windows, out, n_rows)


def pseudolabel_train_predict(train: FleetTable, test: FleetTable, cfg: PseudoLabelConfig,
                              hyper: TrainingHyper, seed: int = 0) -> np.ndarray:
    return PseudoLabelStrategy(cfg, hyper, seed=seed).fit(train).predict(test)
