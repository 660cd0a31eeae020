"""Shared test helpers: instance generators and independent oracles.

The oracles deliberately re-derive everything from scratch (plain numpy
formulas, brute-force grids) so they share no code path with the library.
"""

import numpy as np
import pytest

LN2 = np.log(2.0)


def random_gains_and_budget(rng, K=2):
    """Channel-realistic instance: exponential(1) gains, budget in -5..15 dB."""
    g = rng.exponential(size=K)
    budget = 10.0 ** rng.uniform(-0.5, 1.5)
    return g, budget


def rates_of(p, g):
    return np.log1p(p * g) / LN2


def sum_rate_objective(p, g):
    return rates_of(p, g).sum(axis=-1)


def pf_objective(p, g):
    r = rates_of(p, g)
    with np.errstate(divide="ignore"):
        vals = np.log(r).sum(axis=-1)
    return np.where((r <= 0).any(axis=-1), -np.inf, vals)


def hm_objective(p, g):
    r = rates_of(p, g)
    with np.errstate(divide="ignore"):
        inv = (1.0 / r).sum(axis=-1)
    return np.where((r <= 0).any(axis=-1), -np.inf, -inv)


def l1_fairness_of(rates):
    rates = np.asarray(rates, dtype=float)
    K = rates.shape[-1]
    gamma = rates / rates.sum(axis=-1, keepdims=True)
    return 1.0 - K / (2.0 * (K - 1.0)) * np.abs(gamma - 1.0 / K).sum(axis=-1)


def grid_search_k2(objective, g, budget, steps=100_001):
    """Brute-force oracle on the two-user budget line, uniform t grid."""
    t = np.linspace(0.0, 1.0, steps)
    p = np.stack([t * budget, (1.0 - t) * budget], axis=1)
    vals = objective(p, g)
    best = int(np.argmax(vals))
    return float(vals[best]), p[best]


def nearest_on_polyline(vertices, point, steps_per_segment=1_000_001):
    """Dense-walk oracle for the closest point on a piecewise-linear curve."""
    px, py = point
    best = (np.inf, None)
    for (x0, y0), (x1, y1) in zip(vertices[:-1], vertices[1:]):
        t = np.linspace(0.0, 1.0, steps_per_segment)
        xs = x0 + t * (x1 - x0)
        ys = y0 + t * (y1 - y0)
        d2 = (xs - px) ** 2 + (ys - py) ** 2
        i = int(np.argmin(d2))
        if d2[i] < best[0]:
            best = (float(d2[i]), (float(xs[i]), float(ys[i])))
    return best


def exhaustive_two_block_split(hull_a, hull_b, target_avg, step=1e-3):
    """Brute-force oracle for the best fairness of a two-block rate split."""
    (ra, fa), (rb, fb) = hull_a, hull_b
    total = 2.0 * target_avg
    lo = max(ra[0], total - rb[-1])
    hi = min(ra[-1], total - rb[0])
    assert lo <= hi + 1e-12
    r1 = np.arange(lo, hi + step, step)
    r1 = np.clip(r1, lo, hi)
    f = np.interp(r1, ra, fa) + np.interp(total - r1, rb, fb)
    return float(f.max()) / 2.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
