"""Reference predictors: the decision-tree baseline and the failure-map oracle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from fleetrisk.labeling import risk_codes
from fleetrisk.schema import FleetTable
from fleetrisk.strategies.base import Strategy, StrategyError, index_windows, scatter
from fleetrisk.strategies.rules import _Config
from fleetrisk.tree import TreeClassifier, fit_tree_baseline


@dataclass(frozen=True)
class TreeConfig(_Config):
    depth: int = 5


class TreeBaselineStrategy(Strategy):
    """Per-row tree on the raw sensor features."""

    name = "tree-baseline"
    config_type = TreeConfig

    def __init__(self, cfg: TreeConfig = TreeConfig(), seed: int = 0):
        super().__init__(cfg, seed)
        self._train: FleetTable | None = None
        self._trees: dict[int, TreeClassifier] = {}

    def fit(self, train: FleetTable) -> "TreeBaselineStrategy":
        if not train.labeled:
            raise StrategyError("tree baseline needs labels")
        self._train = train
        self._trees = {}
        return self

    def tree(self, depth: int) -> TreeClassifier:
        if depth not in self._trees:
            self._trees[depth] = fit_tree_baseline(self._train.features, self._train.risk_level, depth)
        return self._trees[depth]

    def evidence(self, test: FleetTable) -> FleetTable:
        if self._train is None:
            raise StrategyError("strategy is not fitted")
        return test

    def decide(self, evidence: FleetTable, cfg: TreeConfig | None = None) -> np.ndarray:
        cfg = cfg or self.cfg
        return self.tree(cfg.depth).predict(evidence.features)


class OracleStrategy(Strategy):
    """Labels test rows straight from the failure map."""

    name = "oracle"
    config_type = type(None)

    def __init__(self, failures: Mapping[str, int | None], seed: int = 0):
        super().__init__(None, seed)
        self.failures = failures

    def fit(self, train: FleetTable) -> "OracleStrategy":
        return self

    def evidence(self, test: FleetTable) -> FleetTable:
        return test

    def decide(self, evidence: FleetTable, cfg=None) -> np.ndarray:
        windows = index_windows(evidence)
        labels = [risk_codes(iw.window.timesteps, self.failures[iw.window.chassis_id]) for iw in windows]
        return scatter(windows, labels, len(evidence))
