"""Fairness measures: hand values, identities, bounds, sensitivity."""

import numpy as np
import pytest

from fairshare.errors import UndefinedForSingleUser, ZeroSumRate
from fairshare.fairness import jain_cos_identity, jain_index, l1_fairness, normalize


def random_shares(rng, K):
    raw = rng.exponential(size=K)
    return raw / raw.sum()


def test_normalize_hand_values():
    assert np.allclose(normalize([3.0, 1.0]), [0.75, 0.25])
    assert np.allclose(normalize([2.0, 2.0, 2.0]), 1.0 / 3.0)
    with pytest.raises(ZeroSumRate):
        normalize([0.0, 0.0])


def test_jain_hand_values():
    for K in (2, 3, 5, 8):
        assert jain_index(np.full(K, 1.0 / K)) == pytest.approx(1.0, abs=1e-15)
    assert jain_index([1.0, 0.0]) == pytest.approx(0.5, abs=1e-15)
    assert jain_index([0.75, 0.25]) == pytest.approx(0.8, abs=1e-15)


def test_cos_identity_hand_values():
    assert jain_cos_identity([0.5, 0.5]) == pytest.approx(1.0, abs=1e-15)
    assert jain_cos_identity([1.0, 0.0]) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_cos_identity_matches_jain(seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        gamma = random_shares(rng, rng.integers(2, 9))
        assert abs(jain_cos_identity(gamma) - jain_index(gamma)) <= 1e-12


def test_l1_hand_values():
    for K in (2, 4, 8):
        assert l1_fairness(np.full(K, 1.0 / K)) == 1.0
        basis = np.zeros(K)
        basis[0] = 1.0
        assert l1_fairness(basis) == 0.0
    assert l1_fairness([0.75, 0.25]) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(UndefinedForSingleUser):
        l1_fairness([1.0])


@pytest.mark.parametrize("seed", range(10))
def test_bounds_hold(seed):
    rng = np.random.default_rng(100 + seed)
    for _ in range(100):
        K = int(rng.integers(2, 10))
        gamma = random_shares(rng, K)
        j = jain_index(gamma)
        f = l1_fairness(gamma)
        assert 1.0 / K <= j <= 1.0
        assert 0.0 <= f <= 1.0


def test_scale_invariance():
    rng = np.random.default_rng(5)
    for _ in range(50):
        rates = rng.exponential(size=4)
        base_j = jain_index(normalize(rates))
        base_f = l1_fairness(normalize(rates))
        # Power-of-two scalings are exact in floats, so equality is exact.
        for lam in (0.25, 2.0, 1024.0):
            assert jain_index(normalize(lam * rates)) == base_j
            assert l1_fairness(normalize(lam * rates)) == base_f
        for lam in (3.0, 0.7, 1e6):
            assert abs(jain_index(normalize(lam * rates)) - base_j) <= 1e-12
            assert abs(l1_fairness(normalize(lam * rates)) - base_f) <= 1e-12


def perturbation_direction(rng, K):
    """Zero-sum direction with unit l1 norm (stays inside the simplex)."""
    d = rng.standard_normal(K)
    d -= d.mean()
    return d / np.abs(d).sum()


@pytest.mark.parametrize("K", [2, 4, 8])
def test_sensitivity_slopes(K):
    # Near equal shares the l1 deficit is linear in the perturbation size
    # while the Jain deficit is quadratic; log-log slopes pin the exponents.
    rng = np.random.default_rng(K)
    d = perturbation_direction(rng, K)
    eps = np.logspace(-4, -1, 13)
    f_def = []
    j_def = []
    for e in eps:
        gamma = 1.0 / K + e * d
        assert gamma.min() > 0.0
        f_def.append(1.0 - l1_fairness(gamma))
        j_def.append(1.0 - jain_index(gamma))
    slope_f = np.polyfit(np.log(eps), np.log(f_def), 1)[0]
    slope_j = np.polyfit(np.log(eps), np.log(j_def), 1)[0]
    assert abs(slope_f - 1.0) <= 0.05
    assert abs(slope_j - 2.0) <= 0.05


@pytest.mark.parametrize("seed", range(10))
def test_transfer_toward_mean_does_not_decrease_l1(seed):
    rng = np.random.default_rng(300 + seed)
    K = int(rng.integers(2, 8))
    gamma = random_shares(rng, K)
    above = int(np.argmax(gamma - 1.0 / K))
    below = int(np.argmin(gamma - 1.0 / K))
    if gamma[above] <= 1.0 / K or gamma[below] >= 1.0 / K:
        return
    room = min(gamma[above] - 1.0 / K, 1.0 / K - gamma[below])
    before = l1_fairness(gamma)
    shifted = gamma.copy()
    delta = rng.uniform(0.0, room)
    shifted[above] -= delta
    shifted[below] += delta
    assert l1_fairness(shifted) >= before - 1e-15


def test_l1_saturates_with_many_users():
    # Equal shares score 1 regardless of K (informal saturation check).
    values = [l1_fairness(np.full(K, 1.0 / K)) for K in (2, 10, 100, 1000)]
    assert values == [1.0, 1.0, 1.0, 1.0]
