"""Two-step row classifier: healthy/non-healthy first, then Medium/High split.

Stage one scores every readout with a stochastic bootstrap ensemble and
judges a whole window from the min, mean and max of its scores. Non-healthy
windows start from the 3 Medium / 7 High baseline, whose boundary is then
moved according to an auxiliary ensemble that spots the last two readouts
before a failure.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from fleetrisk.labeling import WINDOW_LENGTH
from fleetrisk.learners import StochasticEnsemble, TrainingHyper, ensemble_fit, ensemble_score
from fleetrisk.rng import substream
from fleetrisk.schema import FleetTable, RiskLabel
from fleetrisk.strategies.base import Strategy, StrategyError, index_windows, scatter, with_timestep
from fleetrisk.strategies.rules import Health, TwoStepConfig, adjust_with_aux, baseline_73, healthy_decision

VERY_HIGH_TTF = 2


@dataclass(eq=False)
class TwoStepEvidence:
    windows: list
    row_scores: list[np.ndarray]
    aux_max: np.ndarray
    n_rows: int


class TwoStepStrategy(Strategy):
    name = "twostep"
    config_type = TwoStepConfig

    def __init__(self, cfg: TwoStepConfig = TwoStepConfig(), hyper: TrainingHyper = TrainingHyper(),
                 aux_hyper: TrainingHyper | None = None, n_models: int = 5, n_draws: int = 20,
                 seed: int = 0):
        super().__init__(cfg, seed)
        self.hyper = replace(hyper, seed=seed)
        self.aux_hyper = replace(aux_hyper or hyper, seed=seed + 1)
        self.n_models = n_models
        self.n_draws = n_draws
        self.stage1: StochasticEnsemble | None = None
        self.aux: StochasticEnsemble | None = None

    def fit(self, train: FleetTable) -> "TwoStepStrategy":
        if not train.labeled:
            raise StrategyError("two-step training needs labels")
        X_time = with_timestep(train)
        keep, target = [], []
        aux_rows, aux_target = [], []
        for iw in index_windows(train):
            labels = iw.window.labels
            if not iw.window.unhealthy:
                keep.append(iw.rows)
                target.append(np.zeros(len(iw.rows)))
                continue
            # Low readouts of a failing truck are neither healthy nor at risk
            at_risk = labels > RiskLabel.LOW
            keep.append(iw.rows[at_risk])
            target.append(np.ones(int(at_risk.sum())))
            if len(iw.rows) >= WINDOW_LENGTH:
                ttf = iw.window.end_timestep - iw.window.timesteps
                aux_rows.append(iw.rows)
                aux_target.append((ttf < VERY_HIGH_TTF).astype(float))
        if not aux_rows:
            raise StrategyError("no unhealthy training sequences of at least 10 readouts")
        rows, y = np.concatenate(keep), np.concatenate(target)
        self.stage1 = ensemble_fit(X_time[rows], y, self.n_models, self.hyper)
        rows = np.concatenate(aux_rows)
        self.aux = ensemble_fit(train.features[rows], np.concatenate(aux_target), self.n_models, self.aux_hyper)
        return self

    def evidence(self, test: FleetTable) -> TwoStepEvidence:
        if self.stage1 is None:
            raise StrategyError("strategy is not fitted")
        windows = index_windows(test)
        X_time = with_timestep(test)
        row_scores, aux_max = [], []
        # noise is drawn per window so a window's labels do not depend on its neighbours or on row order
        for iw in windows:
            cid = iw.window.chassis_id
            row_scores.append(ensemble_score(self.stage1, X_time[iw.rows], self.n_draws,
                                             substream(self.seed, f"stage1-draws:{cid}")))
            aux = ensemble_score(self.aux, test.features[iw.rows], self.n_draws, substream(self.seed, f"aux-draws:{cid}"))
            aux_max.append(float(np.max(aux)))
        return TwoStepEvidence(windows=windows, row_scores=row_scores, aux_max=np.array(aux_max), n_rows=len(test))

    def decide(self, evidence: TwoStepEvidence, cfg: TwoStepConfig | None = None) -> np.ndarray:
        cfg = cfg or self.cfg
        out = []
        for iw, scores, aux_max in zip(evidence.windows, evidence.row_scores, evidence.aux_max):
            n = len(iw.rows)
            if healthy_decision(scores, cfg) is Health.HEALTHY:
                out.append([RiskLabel.LOW] * n)
            else:
                out.append(adjust_with_aux(baseline_73(n), float(aux_max), cfg))
        return scatter(evidence.windows, out, evidence.n_rows)


def twostep_predict(train: FleetTable, test: FleetTable, hyper: TrainingHyper, cfg: TwoStepConfig,
                    seed: int = 0) -> np.ndarray:
    return TwoStepStrategy(cfg, hyper, seed=seed).fit(train).predict(test)
