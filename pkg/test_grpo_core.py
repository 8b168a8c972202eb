"""
GRPO core tests: advantage normalisation, the clipped surrogate and the
KL-regularised objective.
"""
import json
import math

import numpy as np
import pytest

from layers.errors import ConfigError, GroupTooSmall, LengthMismatch, MissingKl, MissingRatios
from layers.grpo_core import (
    GrpoConfig,
    SampleGroup,
    batch_objective,
    clipped_surrogate,
    group_advantages,
    group_stats,
    grpo_objective,
    importance_ratios,
    load_groups,
)

CFG = GrpoConfig()


def test_defaults():
    assert (CFG.clip_eps, CFG.beta, CFG.std_floor) == (0.2, 0.04, 1e-8)
    with pytest.raises(ConfigError):
        GrpoConfig(clip_eps=0.0)
    with pytest.raises(ConfigError):
        GrpoConfig(beta=-1.0)


# ── Advantages ───────────────────────────────────────────────────────────────

def test_constant_group_has_zero_advantages():
    assert group_advantages([1, 1, 1, 1]) == [0.0, 0.0, 0.0, 0.0]
    assert group_advantages([0, 0]) == [0.0, 0.0]


def test_group_size_follows_the_rewards():
    for n in (2, 3, 8, 16):
        assert len(group_advantages(list(range(n)))) == n
    with pytest.raises(GroupTooSmall):
        group_advantages([1.0])


def test_hand_vectors():
    assert group_advantages([0, 2]) == pytest.approx([-1.0, 1.0])
    assert group_advantages([1, 2, 3]) == pytest.approx([-1.224744871, 0.0, 1.224744871])


def test_group_too_small():
    with pytest.raises(GroupTooSmall):
        group_advantages([1.0])
    with pytest.raises(GroupTooSmall):
        group_advantages([])


def test_random_groups_are_standardised():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        g = int(rng.integers(2, 17))
        rewards = rng.normal(0.0, float(rng.uniform(0.01, 10.0)), g)
        adv = np.asarray(group_advantages(rewards.tolist()))
        assert abs(adv.mean()) <= 1e-9
        assert abs(adv.std() - 1.0) <= 1e-9


def test_shift_and_scale_invariance():
    rng = np.random.default_rng(4)
    for _ in range(100):
        rewards = rng.normal(0.0, 1.0, 8)
        base = np.asarray(group_advantages(rewards.tolist()))
        shifted = np.asarray(group_advantages((rewards + 37.5).tolist()))
        scaled = np.asarray(group_advantages((rewards * 4.0).tolist()))
        assert np.allclose(base, shifted, atol=1e-9)
        assert np.allclose(base, scaled, atol=1e-9)


def test_extreme_finite_rewards_stay_finite():
    adv = group_advantages([1e308, -1e308, 0.0, 1e308])
    assert all(math.isfinite(a) for a in adv)
    assert group_advantages([5e-324, 0.0]) == [0.0, 0.0]


def test_group_stats():
    stats = group_stats([0.0, 2.0])
    assert stats == {"mean": 1.0, "std": 1.0, "min": 0.0, "max": 2.0, "size": 2}


# ── Surrogate ────────────────────────────────────────────────────────────────

def test_unit_ratios_give_mean_advantage():
    adv = [0.5, -1.0, 2.0, -1.5]
    assert clipped_surrogate([1.0] * 4, adv) == pytest.approx(float(np.mean(adv)))


def test_clip_hand_values():
    assert clipped_surrogate([2.0], [1.0]) == pytest.approx(1.2)
    assert clipped_surrogate([2.0], [-1.0]) == pytest.approx(-2.0)
    assert clipped_surrogate([0.5], [-1.0]) == pytest.approx(-0.8)
    assert clipped_surrogate([0.5], [1.0]) == pytest.approx(0.5)


def test_clip_bound_holds_for_random_inputs():
    rng = np.random.default_rng(7)
    eps = CFG.clip_eps
    for _ in range(500):
        r = float(rng.uniform(0.0, 3.0))
        a = float(rng.normal())
        value = clipped_surrogate([r], [a])
        if a >= 0:
            assert value <= (1 + eps) * a + 1e-12
        else:
            assert value <= a * (1 - eps) + 1e-12


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        clipped_surrogate([1.0, 1.0], [0.5])
    with pytest.raises(LengthMismatch):
        importance_ratios([0.0], [0.0, 0.0])


def test_importance_ratios():
    assert importance_ratios([0.0, math.log(2.0)], [0.0, 0.0]) == pytest.approx([1.0, 2.0])


# ── Objective ────────────────────────────────────────────────────────────────

def test_objective_examples():
    flat = SampleGroup.from_rewards([1, 1, 1, 1], ratios=[1] * 4, kl_estimates=[0] * 4)
    assert grpo_objective(flat) == 0.0
    pair = SampleGroup.from_rewards([0, 2], ratios=[1, 1], kl_estimates=[0, 0])
    assert grpo_objective(pair) == pytest.approx(0.0, abs=1e-12)
    penalised = SampleGroup.from_rewards([0, 2], ratios=[1, 1], kl_estimates=[0.5, 0.5])
    assert grpo_objective(penalised) == pytest.approx(-0.02)


def test_objective_needs_ratios_and_kl():
    with pytest.raises(MissingRatios):
        grpo_objective(SampleGroup.from_rewards([0, 2], kl_estimates=[0, 0]))
    with pytest.raises(MissingKl):
        grpo_objective(SampleGroup.from_rewards([0, 2], ratios=[1, 1]))
    with pytest.raises(LengthMismatch):
        SampleGroup.from_rewards([0, 2], ratios=[1, 1, 1])


def test_batch_objective_is_group_mean():
    a = SampleGroup.from_rewards([0, 2], ratios=[1, 1], kl_estimates=[0.5, 0.5])
    b = SampleGroup.from_rewards([0, 2], ratios=[1, 1], kl_estimates=[0.0, 0.0])
    assert batch_objective([a, b]) == pytest.approx(-0.01)
    with pytest.raises(GroupTooSmall):
        batch_objective([])


def test_load_groups(tmp_path):
    path = tmp_path / "groups.jsonl"
    path.write_text(
        json.dumps({"rewards": [0, 2], "ratios": [1, 1], "kl": [0.5, 0.5]}) + "\n\n"
        + json.dumps({"rewards": [3, 3]}) + "\n"
    )
    groups = load_groups(str(path))
    assert len(groups) == 2
    assert groups[0].advantages == pytest.approx([-1.0, 1.0])
    assert groups[1].ratios is None
    assert groups[0].to_dict()["kl"] == [0.5, 0.5]
