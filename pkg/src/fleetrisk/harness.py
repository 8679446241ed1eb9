"""End-to-end orchestration: every stage reads its inputs from disk and writes files."""

from __future__ import annotations

import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from fleetrisk.config import RunConfig, ValidationConfig, dump_json
from fleetrisk.csvio import (read_failures, read_fleet_table, read_prediction_file, read_truth, read_variants,
                             write_failures, write_fleet_table, write_prediction_file, write_truth, write_variants)
from fleetrisk.features import DEFAULT_Q
from fleetrisk.labeling import extract_test_window, truck_sequences, windows_to_table
from fleetrisk.phases import ExperimentRecord, Submission, simulate_phases
from fleetrisk.rng import derive_seed, substream
from fleetrisk.schema import ConfigError, FleetTable, RiskLabel
from fleetrisk.scoring import ScoreReport, challenge_score
from fleetrisk.strategies import build_strategy, calibrate_thresholds, merged_spec, normalize_test, normalize_train
from fleetrisk.strategies.base import Strategy
from fleetrisk.synthetic import GeneratorConfig, generate_fleet, split_train_test

logger = logging.getLogger(__name__)

TRAIN_FILE = "train_gen1.csv"
TEST_FILE = "public_X_test.csv"
VARIANTS_FILE = "variants.csv"
TRUTH_FILE = "truth.csv"
FAILURES_FILE = "failures.csv"


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage


@contextmanager
def stage(name: str) -> Iterator[None]:
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    logger.info("stage %-24s %.2fs", name, time.perf_counter() - t0)


# ---------------------------------------------------------------- generate

def generate_files(gen_cfg: GeneratorConfig, data_dir: str | Path) -> dict[str, Path]:
    """Generate a fleet, split it and write the challenge files plus truth and failures."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    fleet, variants, failures = generate_fleet(gen_cfg)
    split = split_train_test(fleet, variants, failures, gen_cfg)
    paths = {k: data_dir / f for k, f in [("train", TRAIN_FILE), ("test", TEST_FILE), ("variants", VARIANTS_FILE),
                                           ("truth", TRUTH_FILE), ("failures", FAILURES_FILE)]}
    write_fleet_table(split.train, paths["train"])
    write_fleet_table(split.test, paths["test"])
    write_variants(variants, paths["variants"])
    write_failures(failures, paths["failures"])
    write_truth([RiskLabel(int(c)) for c in split.truth], split.test.gen, split.test.chassis_id, split.test.timestep,
                paths["truth"])
    return paths


# -------------------------------------------------------------- validation

def validation_split(train: FleetTable, cfg: ValidationConfig, seed: int) -> tuple[FleetTable, FleetTable, np.ndarray]:
    """Hold out whole training trucks and cut test-style windows from them.

    Each held-out truck contributes ``cfg.draws`` windows; copies are renamed
    ``<id>#<d>`` so that every window is its own sequence. Returns the
    remaining training table, the unlabeled validation table and its truth.
    """
    seqs = truck_sequences(train)
    n_val = int(math.floor(cfg.fraction * len(seqs) + 0.5))
    if n_val < 1 or n_val >= len(seqs):
        raise ConfigError(f"validation fraction {cfg.fraction} leaves no trucks on one side of {len(seqs)}")
    held = set(substream(seed, "validation").permutation(len(seqs))[:n_val].tolist())
    fit_part = windows_to_table([s for k, s in enumerate(seqs) if k not in held])
    windows = []
    for k in sorted(held):
        seq = seqs[k]
        if len(seq) < 10:
            continue
        failure = seq.end_timestep if np.any(seq.labels == RiskLabel.HIGH) else None
        for d in range(cfg.draws):
            w = extract_test_window(seq, failure, substream(seed, "validation-window", k * cfg.draws + d))
            w.chassis_id = f"{seq.chassis_id}#{d}"
            windows.append(w)
    if not windows:
        raise ConfigError("no validation windows could be extracted")
    val = windows_to_table(windows)
    return fit_part, val.with_labels(None), val.risk_level


# ------------------------------------------------------- calibrate/predict

def _prepare(spec: Mapping, table: FleetTable, q: float, train: bool) -> FleetTable:
    if not spec.get("normalize", False):
        return table
    return normalize_train(table, q) if train else normalize_test(table, q)


def fitted_spec(name: str, spec: Mapping, cfg: object) -> dict:
    out = merged_spec(name, spec)
    out["params"] = cfg.to_dict()
    out["grid"] = {}
    return out


def calibrate_strategy(name: str, spec: Mapping, train: FleetTable, validation: ValidationConfig, seed: int,
                       q: float = DEFAULT_Q) -> dict:
    """Fit on part of ``train``, grid-search thresholds on the rest, return a fitted spec.

    The returned spec has its calibrated ``params`` filled in and an empty
    grid, so feeding it back to ``calibrate_strategy`` is a no-op.
    """
    spec = merged_spec(name, spec)
    strategy = build_strategy(name, spec, seed=derive_seed(seed, name, 0))
    if not spec["grid"]:
        out = fitted_spec(name, spec, strategy.cfg)
        out["validation_score"] = None
        return out
    fit_part, val, val_truth = validation_split(train, validation, seed)
    strategy.fit(_prepare(spec, fit_part, q, True))
    best, score = calibrate_thresholds(strategy, _prepare(spec, val, q, False), val_truth, spec["grid"])
    out = fitted_spec(name, spec, best)
    out["validation_score"] = round(score, 12)
    return out


def predict_strategy(name: str, spec: Mapping | None, train: FleetTable, test: FleetTable, seed: int,
                     q: float = DEFAULT_Q, failures=None) -> np.ndarray:
    """Fit a strategy on the full training table and label every test row."""
    if name == "oracle":
        return build_strategy("oracle", failures=failures).predict(test)
    spec = merged_spec(name, {k: v for k, v in (spec or {}).items() if k != "validation_score"})
    strategy: Strategy = build_strategy(name, spec, seed=derive_seed(seed, name, 0))
    strategy.fit(_prepare(spec, train, q, True))
    return strategy.predict(_prepare(spec, test, q, False))


def score_files(truth_path: str | Path, pred_path: str | Path) -> ScoreReport:
    truth, gens = read_truth(truth_path)
    pred = read_prediction_file(pred_path, expected_rows=len(truth))
    return challenge_score(truth, pred, gens)


# ------------------------------------------------------------------ phases

def plan_submissions(dev_scores: Mapping[str, float], preds: Mapping[str, list], cfg: RunConfig) -> list[Submission]:
    """Every strategy enters the development phase; the best by dev score go to the final phase."""
    names = list(preds)
    subs = [Submission("dev", preds[n], day=i // cfg.phases.dev_daily_quota, name=n) for i, n in enumerate(names)]
    ranked = sorted(names, key=lambda n: (-dev_scores[n], names.index(n)))
    subs += [Submission("final", preds[n], name=n) for n in ranked[: cfg.phases.final_quota]]
    return subs


# ------------------------------------------------------------------ run_all

def _json_text(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def summary_text(reports: Mapping[str, ScoreReport], record: ExperimentRecord) -> str:
    lines = ["strategy            gen1     gen2     final"]
    for name, rep in reports.items():
        g1 = rep.per_gen.get("gen1")
        g2 = rep.per_gen.get("gen2")
        lines.append(f"{name:<18} {g1.macro_f1 if g1 else float('nan'):7.4f}  {g2.macro_f1 if g2 else float('nan'):7.4f}"
                     f"  {rep.final:7.4f}")
    for phase in ("dev", "final"):
        best = record.best(phase)
        if best is not None:
            lines.append(f"best {phase}: {best.name} {best.report.final:.4f}")
    return "\n".join(lines) + "\n"


def run_all(config: RunConfig) -> ExperimentRecord:
    """Run generate, calibrate, predict, score and the phase simulation.

    Artifacts land under ``config.output_dir``:
    ``config.json``, ``data/`` (challenge CSVs, truth, failures),
    ``calibrated/<name>.json``, ``predictions/<name>.csv``,
    ``reports/<name>.json``, ``experiment.json`` and ``summary.txt``.
    Outputs hold no timestamps, so equal configs give identical trees.
    """
    out = Path(config.output_dir)
    for sub in ("data", "calibrated", "predictions", "reports"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    # the output location itself is left out so that runs into different directories compare equal
    dump_json({k: v for k, v in config.to_dict().items() if k != "output_dir"}, out / "config.json")
    q = config.features.quantile_q

    with stage("generate"):
        paths = generate_files(config.generator, out / "data")
    with stage("load"):
        train = read_fleet_table(paths["train"], expect_labels=True)
        test = read_fleet_table(paths["test"], expect_labels=False)
        read_variants(paths["variants"]).validate()
        failures = read_failures(paths["failures"])
        truth, gens = read_truth(paths["truth"])
        if len(truth) != len(test):
            raise StageError("load", ValueError(f"truth has {len(truth)} rows, test has {len(test)}"))

    reports: dict[str, ScoreReport] = {}
    preds: dict[str, list] = {}
    dev_scores: dict[str, float] = {}
    for spec in config.strategies:
        name = spec["name"]
        if name == "oracle":
            fitted = {"name": "oracle"}
        else:
            with stage(f"calibrate:{name}"):
                fitted = calibrate_strategy(name, spec, train, config.validation, config.seed, q)
        (out / "calibrated" / f"{name}.json").write_text(_json_text(fitted))
        with stage(f"predict:{name}"):
            fitted = json.loads((out / "calibrated" / f"{name}.json").read_text())
            labels = predict_strategy(name, fitted, train, test, config.seed, q, failures)
            pred_path = out / "predictions" / f"{name}.csv"
            write_prediction_file([RiskLabel(int(c)) for c in labels], pred_path)
            preds[name] = read_prediction_file(pred_path, expected_rows=len(test))
        with stage(f"score:{name}"):
            reports[name] = score_files(paths["truth"], pred_path)
            (out / "reports" / f"{name}.json").write_text(_json_text(reports[name].to_dict()))
            dev_scores[name] = simulate_phases(truth, gens, [Submission("dev", preds[name])], config.phases,
                                               config.seed).entries[0].report.final

    with stage("simulate-phases"):
        record = simulate_phases(truth, gens, plan_submissions(dev_scores, preds, config), config.phases, config.seed)
        (out / "experiment.json").write_text(_json_text(record.to_dict()))
        summary = summary_text(reports, record)
        (out / "summary.txt").write_text(summary)
    logger.info("summary\n%s", summary.rstrip())
    return record


def replace_strategies(config: RunConfig, names: list[str]) -> RunConfig:
    return replace(config, strategies=tuple({"name": n} for n in names))
