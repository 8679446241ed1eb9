from __future__ import annotations

import itertools

import pytest

from fleetrisk.schema import ConfigError, RiskLabel
from fleetrisk.strategies.rules import (Health, JumpConfig, PseudoLabelConfig, TargetError, TwoStepConfig,
                                        adjust_with_aux, baseline_73, enforce_monotonic_risk, healthy_decision,
                                        is_single_jump, jump_target, majority_vote, percentile_to_split,
                                        split_labels)

L, M, H = RiskLabel.LOW, RiskLabel.MEDIUM, RiskLabel.HIGH
HALF = TwoStepConfig(t_min=0.5, t_mean=0.5, t_max=0.5)


def test_healthy_decision_examples():
    assert healthy_decision([0.0] * 10, TwoStepConfig(t_min=0.1, t_mean=0.1, t_max=0.1)) is Health.HEALTHY
    assert healthy_decision([1.0] * 10, HALF) is Health.NON_HEALTHY
    assert healthy_decision([0.1, 0.2, 0.9], HALF) is Health.NON_HEALTHY
    assert healthy_decision([0.1, 0.2, 0.4], HALF) is Health.HEALTHY


def test_baseline_73():
    assert baseline_73(10) == [M] * 3 + [H] * 7
    assert baseline_73(7) == [H] * 7
    assert baseline_73(12) == [M] * 5 + [H] * 7
    assert baseline_73(3) == [H] * 3


def test_adjust_with_aux():
    cfg = TwoStepConfig(aux_lo=0.2, aux_hi=0.6, boundary_shift_limit=2)
    base = baseline_73(10)
    assert adjust_with_aux(base, 0.4, cfg) == base
    assert adjust_with_aux(base, 1.0, cfg) == [M] + [H] * 9
    assert adjust_with_aux(base, 0.0, cfg) == [M] * 5 + [H] * 5
    big = TwoStepConfig(aux_lo=0.2, aux_hi=0.6, boundary_shift_limit=20)
    assert adjust_with_aux(base, 1.0, big) == [H] * 10
    assert adjust_with_aux(base, 0.0, big) == [M] * 10


def test_config_invariants():
    with pytest.raises(ValueError):
        TwoStepConfig(aux_lo=0.7, aux_hi=0.3)
    with pytest.raises(ValueError):
        PseudoLabelConfig(n_iterations=2, capacity_schedule=((),))
    with pytest.raises(ValueError):
        PseudoLabelConfig(n_iterations=2, capacity_schedule=((16,), (4,)))
    assert TwoStepConfig.from_dict(HALF.to_dict()) == HALF
    assert JumpConfig.from_dict({"healthy_threshold": 0.3}).healthy_threshold == 0.3
    p = PseudoLabelConfig()
    assert PseudoLabelConfig.from_dict(p.to_dict()) == p
    with pytest.raises((ValueError, ConfigError)):
        JumpConfig.from_dict({"threshold": 0.3})


def test_percentile_to_split():
    assert percentile_to_split(0.65, 10) == 6
    assert split_labels(percentile_to_split(0.65, 10), 10) == [M] * 6 + [H] * 4
    assert percentile_to_split(0.0, 10) == 0
    assert percentile_to_split(1.0, 10) == 10
    assert percentile_to_split(-0.5, 10) == 0 and percentile_to_split(3.0, 10) == 10


def test_jump_target():
    assert jump_target([M] * 6 + [H] * 4) == pytest.approx(0.6)
    assert jump_target([H] * 10) == 0.0
    assert jump_target([M] * 10) == 1.0
    with pytest.raises(TargetError):
        jump_target([L] + [H] * 9)
    with pytest.raises(TargetError):
        jump_target([M, H, M, H])


@pytest.mark.parametrize("length", [1, 7, 10, 13])
def test_split_inverts_target(length):
    for k in range(length + 1):
        labels = split_labels(k, length)
        assert split_labels(percentile_to_split(jump_target(labels), length), length) == labels


def test_monotonic_examples():
    assert enforce_monotonic_risk([L, M, L, H]) == [L, M, M, H]
    assert enforce_monotonic_risk([L, L, H, H]) == [L, L, H, H]
    assert enforce_monotonic_risk([H, L, L, L]) == [H] * 4


def test_monotonic_exhaustive_properties():
    for seq in itertools.product([L, M, H], repeat=5):
        out = enforce_monotonic_risk(seq)
        assert all(a <= b for a, b in zip(out, out[1:]))
        assert all(o >= s for o, s in zip(out, seq))
        assert enforce_monotonic_risk(out) == out


def test_majority_vote_table():
    assert majority_vote([H, H, M]) == H
    assert majority_vote([L, H]) == H
    assert majority_vote([L, M]) == M
    for votes in itertools.product([L, M, H], repeat=4):
        top = max(votes.count(c) for c in (L, M, H))
        winners = [c for c in (L, M, H) if votes.count(c) == top]
        assert majority_vote(votes) == max(winners)


def test_single_jump_predicate():
    assert is_single_jump([L] * 10)
    assert is_single_jump([M, M, H])
    assert is_single_jump([H] * 3)
    assert not is_single_jump([M, H, M])
    assert not is_single_jump([L, M, H])
