"""Acceptance checks, one test per criterion.

Each test appends a PASS/FAIL line (with the measured value, the tolerance
and the wall time) to the report printed at the end of the pytest run.
"""

from __future__ import annotations

import filecmp
import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fleetrisk.config import RunConfig
from fleetrisk.features import lower_quantile, quantile_shift_normalize
from fleetrisk.harness import run_all
from fleetrisk.labeling import assign_risk_label
from fleetrisk.learners import layer_shapes, n_params, net_loss_grad
from fleetrisk.phases import PhaseConfig, QuotaError, Submission, simulate_phases
from fleetrisk.schema import FleetTable, RiskLabel
from fleetrisk.scoring import challenge_score, confusion_counts, macro_f1
from fleetrisk.strategies import build_strategy, normalize_test, normalize_train
from fleetrisk.strategies.base import index_windows
from fleetrisk.strategies.rules import is_single_jump
from fleetrisk.synthetic import GeneratorConfig, generate_fleet, split_train_test
from fleetrisk.wavelet import dwt_db4, idwt_db4

LEARNED = ("twostep", "jump", "pseudolabel")


def record(name: str, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    ok = ok and elapsed <= budget
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}; {elapsed:.2f}s (budget {budget:g}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _expected_band(ttf):
    if ttf is None or ttf >= 18:
        return RiskLabel.LOW
    return RiskLabel.MEDIUM if ttf >= 9 else RiskLabel.HIGH


def test_labeling_rule_suite():
    t0 = time.perf_counter()
    cases = [None] + list(range(41))
    wrong = [t for t in cases if assign_risk_label(t) is not _expected_band(t)]
    boundaries = {8: RiskLabel.HIGH, 9: RiskLabel.MEDIUM, 17: RiskLabel.MEDIUM, 18: RiskLabel.LOW}
    wrong += [t for t, lab in boundaries.items() if assign_risk_label(t) is not lab]
    record("labeling rule suite", not wrong, f"{len(cases)} ttf values, {len(wrong)} mismatches (tol 0)",
           time.perf_counter() - t0, 1)


def _brute_macro(y_true, y_pred) -> float:
    total = 0.0
    for c in range(3):
        tp = sum(1 for a, b in zip(y_true, y_pred) if a == c == b)
        fp = sum(1 for a, b in zip(y_true, y_pred) if a != c and b == c)
        fn = sum(1 for a, b in zip(y_true, y_pred) if a == c and b != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        total += 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return total / 3


def test_scoring_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        t, p = rng.integers(0, 3, n).tolist(), rng.integers(0, 3, n).tolist()
        worst = max(worst, abs(macro_f1(confusion_counts(t, p)) - _brute_macro(t, p)))
    record("scoring oracle equivalence", worst <= 1e-12, f"1000 lists, max |diff| {worst:.1e} (tol 1e-12)",
           time.perf_counter() - t0, 10)


def test_scoring_fixtures():
    t0 = time.perf_counter()
    L, M, H = RiskLabel.LOW, RiskLabel.MEDIUM, RiskLabel.HIGH
    sixth = macro_f1(confusion_counts([L, M, H], [L, L, L]))
    ninth = macro_f1(confusion_counts([H, H], [H, M]))
    g1t, g1p = [L, L, M, M, H, H, H, H, H, H], [L, L, M, M, L, M, H, H, H, H]
    g2t, g2p = [L, L, L, M], [L, L, H, M]
    rep = challenge_score(g1t + g2t, g1p + g2p, ["gen1"] * 10 + ["gen2"] * 4)
    errs = [abs(sixth - 1 / 6), abs(ninth - 2 / 9), abs(rep.per_gen["gen1"].macro_f1 - 0.8),
            abs(rep.per_gen["gen2"].macro_f1 - 0.6), abs(rep.final - 0.7)]
    record("scoring fixtures", max(errs) <= 1e-15,
           f"1/6 -> {sixth:.6f}, 2/9 -> {ninth:.6f}, 0.8/0.6 -> {rep.final:.6f} (tol 1e-15)",
           time.perf_counter() - t0, 1)


def test_wavelet_suite():
    t0 = time.perf_counter()
    const = max(np.max(np.abs(d)) for lv in (1, 2, 3) for d in dwt_db4(np.full(64, -2.5), lv).details)
    ramp_c = dwt_db4(0.3 * np.arange(32) + 1.0, 1).details[0]
    ramp = np.max(np.abs(ramp_c[3:16]))  # coefficients whose taps stay inside the signal
    rng = np.random.default_rng(7)
    recon = max(np.max(np.abs(idwt_db4(dwt_db4(x, 3)) - x)) for x in rng.normal(size=(100, 64)))
    ok = const < 1e-10 and ramp < 1e-8 and recon < 1e-8
    record("wavelet suite", ok,
           f"constant detail {const:.1e} (<1e-10), ramp interior {ramp:.1e} (<1e-8), round trip {recon:.1e} (<1e-8)",
           time.perf_counter() - t0, 5)


def test_quantile_shift_suite(reference_split):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst_q = 0.0
    for _ in range(100):
        n = int(rng.integers(5, 400))
        col = rng.standard_t(3, size=n) * rng.uniform(0.1, 10) + rng.uniform(-50, 50)
        t = FleetTable(np.arange(1, n + 1), ["a"] * n, ["gen1"] * n, col[:, None])
        worst_q = max(worst_q, abs(lower_quantile(quantile_shift_normalize(t, 0.005).features, 0.005)[0]))

    split, _ = reference_split
    test = split.test
    shifted = test.with_features(test.features + np.where(test.gen == "gen2", 5.0, 0.0)[:, None])
    train = normalize_train(split.train)
    changed = {}
    for name in LEARNED:
        strategy = build_strategy(name, seed=4).fit(train)
        a = strategy.predict(normalize_test(test))
        b = strategy.predict(normalize_test(shifted))
        changed[name] = int(np.sum(a != b))
    ok = worst_q == 0.0 and not any(changed.values())
    detail = ", ".join(f"{k} {v} changed" for k, v in changed.items())
    record("quantile-shift suite", ok, f"max post-shift quantile {worst_q:.1e} (tol 0); +5.0 on gen2: {detail}",
           time.perf_counter() - t0, 60)


def test_learner_gradient_checks():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for hidden in ((), (7,)):
        shapes = layer_shapes(5, hidden)
        X = rng.normal(size=(40, 5))
        y = (rng.random(40) < 0.4).astype(float)
        for _ in range(5):
            p = rng.normal(size=n_params(shapes))
            _, g = net_loss_grad(p, X, y, shapes, 1e-3)
            h = 1e-5
            num = np.array([(net_loss_grad(p + h * e, X, y, shapes, 1e-3)[0]
                             - net_loss_grad(p - h * e, X, y, shapes, 1e-3)[0]) / (2 * h)
                            for e in np.eye(len(p))])
            rel = np.max(np.abs(g - num) / np.maximum(np.abs(num), 1e-8 + np.abs(g)))
            worst = max(worst, float(rel))
    record("learner gradient checks", worst <= 1e-4, f"logistic and one hidden layer, max rel err {worst:.1e} (tol 1e-4)",
           time.perf_counter() - t0, 10)


def test_structural_output_invariants():
    t0 = time.perf_counter()
    cfg = GeneratorConfig(n_trucks=320, gen2_fraction=0.6, seed=5)
    fleet, variants, failures = generate_fleet(cfg)
    split = split_train_test(fleet, variants, failures, cfg)
    train, test = normalize_train(split.train), normalize_test(split.test)
    windows = index_windows(test)
    bad = {}
    for name in LEARNED:
        pred = build_strategy(name, seed=6).fit(train).predict(test)
        if name == "pseudolabel":
            bad[name] = sum(1 for iw in windows if np.any(np.diff(pred[iw.rows]) < 0))
        else:
            bad[name] = sum(1 for iw in windows if not is_single_jump(pred[iw.rows]))
    ok = len(windows) >= 200 and not any(bad.values())
    detail = ", ".join(f"{k} {v} violations" for k, v in bad.items())
    record("structural output invariants", ok, f"{len(windows)} test sequences (need >= 200); {detail}",
           time.perf_counter() - t0, 60)


def test_oracle_consistency():
    t0 = time.perf_counter()
    finals = []
    for seed in (1, 2, 3):
        cfg = GeneratorConfig(seed=seed)
        fleet, variants, failures = generate_fleet(cfg)
        split = split_train_test(fleet, variants, failures, cfg)
        pred = build_strategy("oracle", failures=failures).predict(split.test)
        finals.append(challenge_score(split.truth, pred, split.test.gen).final)
    record("oracle consistency", all(f == 1.0 for f in finals), f"final scores {finals} (need exactly 1.0)",
           time.perf_counter() - t0, 10)


@pytest.fixture(scope="module")
def reference_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("reference")
    timings = []
    records = []
    for tag in ("a", "b"):
        t0 = time.perf_counter()
        records.append(run_all(RunConfig(output_dir=str(base / tag))))
        timings.append(time.perf_counter() - t0)
    return base, records, timings


def test_end_to_end_learnability(reference_runs):
    base, records, timings = reference_runs
    names = [e.name for e in records[0].entries if e.phase == "dev"]
    assert set(names) == {"tree-baseline", *LEARNED}
    scores = {n: json.loads((base / "a" / "reports" / f"{n}.json").read_text())["final"] for n in names}
    tree = scores["tree-baseline"]
    ok = all(scores[n] >= tree + 0.05 for n in LEARNED) and scores["twostep"] >= 0.75
    detail = ", ".join(f"{n} {scores[n]:.3f}" for n in ("tree-baseline", *LEARNED))
    record("end-to-end learnability", ok,
           f"{detail} (need each >= tree + 0.05 = {tree + 0.05:.3f}, twostep >= 0.75)", timings[0], 300)


def test_phase_simulation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    truth = rng.integers(0, 3, 100)
    gens = np.where(np.arange(100) < 60, "gen1", "gen2")
    checks = []
    try:
        simulate_phases(truth, gens, [Submission("dev", truth, day=0)] * 6)
        checks.append(False)
    except QuotaError as exc:
        checks.append("submission 5" in str(exc))
    try:
        simulate_phases(truth, gens, [Submission("final", truth)] * 4)
        checks.append(False)
    except QuotaError as exc:
        checks.append("submission 3" in str(exc))
    preds = []
    for acc in (0.5, 0.9, 0.7):
        p = truth.copy()
        flip = rng.random(100) > acc
        p[flip] = (p[flip] + 1) % 3
        preds.append(p)
    rec = simulate_phases(truth, gens, [Submission("final", p, name=f"s{k}") for k, p in enumerate(preds)],
                          PhaseConfig())
    scores = [challenge_score(truth, p, gens).final for p in preds]
    checks.append(rec.best("final").report.final == max(scores))
    checks.append(rec.best_so_far["final"] == list(np.maximum.accumulate(scores)))
    five = simulate_phases(truth, gens, [Submission("dev", truth, day=0)] * 5 + [Submission("dev", truth, day=1)])
    checks.append(len(five.entries) == 6)
    record("phase simulation", all(checks), f"{sum(checks)}/{len(checks)} scripted checks (dev 5/day, final 3, best)",
           time.perf_counter() - t0, 5)


def test_determinism(reference_runs):
    base, _, timings = reference_runs
    cmp = filecmp.dircmp(base / "a", base / "b")
    n_files, diffs = 0, []

    def walk(c):
        nonlocal n_files
        diffs.extend(c.left_only + c.right_only)
        _, mismatch, errors = filecmp.cmpfiles(c.left, c.right, c.common_files, shallow=False)
        n_files += len(c.common_files)
        diffs.extend(mismatch + errors)
        for sub in c.subdirs.values():
            walk(sub)

    walk(cmp)
    record("determinism", not diffs and n_files > 10, f"{n_files} files compared, {len(diffs)} differ (tol 0 bytes)",
           timings[1], 300)
