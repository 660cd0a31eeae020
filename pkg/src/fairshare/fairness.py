"""Quantitative fairness measures over per-user rate vectors.

Both measures act on the normalized rate vector gamma (shares summing to 1)
and compare it against the equal-share vector e = (1/K, ..., 1/K). Jain's
index equals the squared cosine of the angle between gamma and e and is
quadratically insensitive near equality; the l1-based measure varies linearly
with that angle, which is what makes it usable at high SNR where all shares
crowd together.
"""

import numpy as np

from fairshare.errors import UndefinedForSingleUser, ZeroSumRate

#: Absolute tolerance for validating normalized share vectors (O(1) quantities).
SHARE_TOL = 1e-12


def normalize(rates) -> np.ndarray:
    """Normalized rate shares gamma_k = R_k / sum(R).

    Raises ZeroSumRate when the rates sum to zero: every downstream measure is
    undefined there, and defaulting silently would mask allocator bugs.
    """
    rates = np.asarray(rates, dtype=np.float64)
    if np.any(rates < 0.0):
        raise ValueError("rates must be nonnegative")
    total = rates.sum()
    if total <= 0.0:
        raise ZeroSumRate("sum rate is zero; normalized shares are undefined")
    return rates / total


def _check_shares(gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim != 1 or gamma.shape[0] < 1:
        raise ValueError("shares must be a nonempty 1-D vector")
    if np.any(gamma < -SHARE_TOL):
        raise ValueError("shares must be nonnegative")
    if abs(gamma.sum() - 1.0) > max(SHARE_TOL, gamma.shape[0] * np.finfo(np.float64).eps):
        raise ValueError("shares must sum to 1")
    return gamma


def jain_index(gamma) -> float:
    """Jain's index 1 / (K ||gamma||^2), in [1/K, 1].

    Equals 1 iff all shares are equal and 1/K iff one user holds everything.
    The result is clamped to the mathematical range to keep float noise from
    leaking outside it.
    """
    gamma = _check_shares(gamma)
    K = gamma.shape[0]
    value = 1.0 / (K * float(gamma @ gamma))
    return min(max(value, 1.0 / K), 1.0)


def jain_cos_identity(gamma) -> float:
    """Squared cosine of the angle between gamma and the equal-share vector.

    Computed directly from inner products; agrees with `jain_index` to float
    precision, which the tests pin down.
    """
    gamma = _check_shares(gamma)
    K = gamma.shape[0]
    e = np.full(K, 1.0 / K)
    value = float(gamma @ e) ** 2 / (float(gamma @ gamma) * float(e @ e))
    return min(max(value, 1.0 / K), 1.0)


def l1_fairness(gamma) -> float:
    """l1-based fairness 1 - K/(2(K-1)) * ||gamma - e||_1, in [0, 1].

    Equals 1 iff all shares are equal and 0 iff one user holds everything.
    Needs K >= 2: the normalizing factor is the largest possible l1 deviation
    from equal shares, which is degenerate for a single user.
    """
    gamma = _check_shares(gamma)
    K = gamma.shape[0]
    if K < 2:
        raise UndefinedForSingleUser("l1 fairness needs at least two users")
    deviation = float(np.abs(gamma - 1.0 / K).sum())
    value = 1.0 - K / (2.0 * (K - 1.0)) * deviation
    return min(max(value, 0.0), 1.0)
