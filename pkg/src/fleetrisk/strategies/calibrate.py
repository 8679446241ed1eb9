"""Grid search of strategy thresholds on a held-out validation split."""

from __future__ import annotations

import itertools
import logging
from dataclasses import replace
from typing import Mapping, Sequence

import numpy as np

from fleetrisk.schema import ConfigError, FleetTable
from fleetrisk.scoring import challenge_score
from fleetrisk.strategies.base import Strategy

logger = logging.getLogger(__name__)


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def grid_points(grid: Mapping[str, Sequence]) -> list[dict]:
    """All grid combinations in lexicographic order of (sorted keys, values)."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ConfigError("calibration grid is empty")
    keys = sorted(grid)
    combos = sorted(itertools.product(*[[_freeze(v) for v in grid[k]] for k in keys]))
    return [dict(zip(keys, combo)) for combo in combos]


def calibrate_thresholds(strategy: Strategy, validation: FleetTable, truth: Sequence[int],
                         grid: Mapping[str, Sequence]) -> tuple[object, float]:
    """Pick the grid point with the best challenge score on ``validation``.

    ``strategy`` must already be fitted on trucks disjoint from the
    validation split. Ties keep the lexicographically smallest point.
    """
    points = grid_points(grid)
    evidence = strategy.evidence(validation)
    truth = np.asarray(truth)
    best_cfg, best_score = None, -np.inf
    for point in points:
        try:
            cfg = replace(strategy.cfg, **point)
        except (TypeError, ValueError) as exc:
            logger.debug("skipping invalid grid point %s: %s", point, exc)
            continue
        score = challenge_score(truth, strategy.decide(evidence, cfg), validation.gen).final
        if score > best_score:
            best_cfg, best_score = cfg, score
    if best_cfg is None:
        raise ConfigError("no valid configuration in the calibration grid")
    return best_cfg, float(best_score)
