from __future__ import annotations

import numpy as np
import pytest

from fleetrisk.schema import RiskLabel
from fleetrisk.scoring import (AlignmentError, DegenerateSubsampleError, challenge_score, confusion_counts,
                               dev_phase_score, macro_f1, per_class_f1)

L, M, H = RiskLabel.LOW, RiskLabel.MEDIUM, RiskLabel.HIGH

# gen1 fixture: every class F1 = 0.8; gen2 fixture: macro 0.6
G1_TRUE = [L, L, M, M, H, H, H, H, H, H]
G1_PRED = [L, L, M, M, L, M, H, H, H, H]
G2_TRUE = [L, L, L, M]
G2_PRED = [L, L, H, M]


def brute_macro(y_true, y_pred) -> float:
    """Precision/recall per class by explicit counting; 0/0 counts as 0."""
    total = 0.0
    for c in range(3):
        tp = sum(1 for a, b in zip(y_true, y_pred) if a == c and b == c)
        fp = sum(1 for a, b in zip(y_true, y_pred) if a != c and b == c)
        fn = sum(1 for a, b in zip(y_true, y_pred) if a == c and b != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        total += 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return total / 3


def test_confusion_examples():
    assert np.array_equal(confusion_counts([L, M, H], [L, M, H]), np.eye(3, dtype=int))
    c = confusion_counts([H], [M])
    assert c[2, 1] == 1 and c.sum() == 1
    rng = np.random.default_rng(0)
    t, p = rng.integers(0, 3, 30), rng.integers(0, 3, 30)
    perm = rng.permutation(30)
    assert np.array_equal(confusion_counts(t, p), confusion_counts(t[perm], p[perm]))
    with pytest.raises(AlignmentError):
        confusion_counts([L, M], [L])


def test_hand_fixtures():
    assert macro_f1(confusion_counts([L, M, H], [L, L, L])) == pytest.approx(1 / 6, abs=1e-15)
    assert macro_f1(confusion_counts([H, H], [H, M])) == pytest.approx(2 / 9, abs=1e-15)
    assert list(per_class_f1(confusion_counts([H, H], [H, M]))) == pytest.approx([0.0, 0.0, 2 / 3])
    assert macro_f1(confusion_counts([L, M, H, H], [L, M, H, H])) == 1.0


def test_final_is_mean_of_generations():
    rep = challenge_score(G1_TRUE + G2_TRUE, G1_PRED + G2_PRED, ["gen1"] * 10 + ["gen2"] * 4)
    assert rep.per_gen["gen1"].macro_f1 == pytest.approx(0.8, abs=1e-15)
    assert rep.per_gen["gen2"].macro_f1 == pytest.approx(0.6, abs=1e-15)
    assert rep.final == pytest.approx(0.7, abs=1e-15)
    swapped = challenge_score(G1_TRUE + G2_TRUE, G1_PRED + G2_PRED, ["gen2"] * 10 + ["gen1"] * 4)
    assert swapped.final == pytest.approx(rep.final, abs=1e-15)
    assert rep.as_record() == "gen1=0.800000 gen2=0.600000 final=0.700000"


def test_single_generation_is_flagged():
    rep = challenge_score(G1_TRUE, G1_PRED, ["gen1"] * 10)
    assert rep.partial and rep.final == pytest.approx(0.8)
    assert "gen2=NA" in rep.as_record()


def test_duplication_invariance():
    rng = np.random.default_rng(1)
    t, p = rng.integers(0, 3, 40), rng.integers(0, 3, 40)
    g = np.where(rng.random(40) < 0.5, "gen1", "gen2")
    a = challenge_score(t, p, g)
    b = challenge_score(np.tile(t, 3), np.tile(p, 3), np.tile(g, 3))
    assert a.final == pytest.approx(b.final, abs=1e-15)


def test_bounds_and_perfect():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(1, 30))
        t, p = rng.integers(0, 3, n), rng.integers(0, 3, n)
        m = macro_f1(confusion_counts(t, p))
        assert 0.0 <= m <= 1.0
        if m == 1.0:
            assert np.array_equal(t, p) and len(set(t.tolist())) == 3


def test_oracle_equivalence_random():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        t, p = rng.integers(0, 3, n).tolist(), rng.integers(0, 3, n).tolist()
        assert abs(macro_f1(confusion_counts(t, p)) - brute_macro(t, p)) < 1e-12


def test_alignment_errors():
    with pytest.raises(AlignmentError):
        challenge_score([], [], [])
    with pytest.raises(AlignmentError):
        challenge_score([L], [L, L], ["gen1"])
    with pytest.raises(AlignmentError):
        challenge_score([L], [L], ["gen3"])


def test_dev_phase():
    rng = np.random.default_rng(4)
    t, p = rng.integers(0, 3, 500), rng.integers(0, 3, 500)
    g = np.where(np.arange(500) < 400, "gen1", "gen2")
    full = challenge_score(t, p, g)
    assert dev_phase_score(t, p, g, 1.0, seed=9).to_dict() == full.to_dict()
    a = dev_phase_score(t, p, g, 0.2, seed=9)
    assert a.to_dict() == dev_phase_score(t, p, g, 0.2, seed=9).to_dict()
    assert a.per_gen["gen1"].n_rows == 80 and a.per_gen["gen2"].n_rows == 20
    with pytest.raises(DegenerateSubsampleError):
        dev_phase_score(t[:101], p[:101], np.where(np.arange(101) < 100, "gen1", "gen2"), 0.2)
    with pytest.raises(ValueError):
        dev_phase_score(t, p, g, 0.0)
