"""Split sweep, concave envelope, operating-point selection and sampling."""

import numpy as np
import pytest

from conftest import (
    l1_fairness_of,
    nearest_on_polyline,
    random_gains_and_budget,
    rates_of,
    sum_rate_objective,
)
from fairshare.allocators import max_min, max_sum_rate, proportional_fair
from fairshare.channel import ChannelMatrix, zfdpc_decompose, zfdpc_rates
from fairshare.errors import DegenerateCurve
from fairshare.fairness import l1_fairness, normalize
from fairshare.tristage import (
    OperatingPoint,
    TradeoffCurve,
    cake_cut,
    mix,
    sample_allocation,
    select,
    sweep,
)


def dec_with_gains(gains):
    H = ChannelMatrix(np.diag(np.sqrt(np.asarray(gains, dtype=float))).astype(complex))
    return zfdpc_decompose(H)


def random_dec(rng, K=2):
    return dec_with_gains(rng.exponential(size=K) + 1e-6)


def synthetic_curve(points, budget=1.0, with_hull=True):
    """Curve built from explicit (R, F) pairs; allocations are placeholders."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    curve = TradeoffCurve(
        c=np.linspace(0.0, 1.0, n),
        allocs=np.zeros((n, 2)),
        rates=np.tile(points[:, 0:1] / 2.0, (1, 2)),
        sum_rates=points[:, 0].copy(),
        fairness=points[:, 1].copy(),
        budget=budget,
    )
    return mix(curve) if with_hull else curve


def test_cake_cut_endpoints_match_the_pure_criteria():
    dec = dec_with_gains([1.0, 0.25, 2.0])
    budget = 3.0
    g = dec.effective_gains
    at_zero = cake_cut(dec, budget, 0.0)
    assert np.array_equal(at_zero.alloc.powers, max_sum_rate(g, budget).alloc.powers)
    at_one = cake_cut(dec, budget, 1.0)
    assert np.array_equal(at_one.alloc.powers, max_min(g, budget).alloc.powers)
    assert at_one.fairness == pytest.approx(1.0, abs=1e-12)


def test_cake_cut_hand_case_with_stage_two_oracle():
    # g = [1, 0.25], P = 3, c = 0.5: the equal-rate stage yields [0.3, 1.2];
    # brute force then checks the second stage over its own budget line.
    dec = dec_with_gains([1.0, 0.25])
    point = cake_cut(dec, 3.0, 0.5)
    p1 = np.array([0.3, 1.2])
    assert np.allclose(p1.sum(), 1.5)
    assert np.allclose(point.alloc.powers.sum(), 3.0, atol=1e-12)
    stage2 = point.alloc.powers - p1
    assert np.all(stage2 >= -1e-12)
    g = dec.effective_gains
    t = np.linspace(0.0, 1.0, 100_001)
    cand = np.stack([t * 1.5, (1.0 - t) * 1.5], axis=1) + p1
    best = sum_rate_objective(cand, g).max()
    achieved = sum_rate_objective(point.alloc.powers, g)
    assert achieved >= best - 1e-4
    assert point.sum_rate == pytest.approx(achieved, abs=1e-12)
    assert point.fairness == pytest.approx(
        l1_fairness(normalize(rates_of(point.alloc.powers, g))), abs=1e-10)


@pytest.mark.parametrize("seed", range(15))
def test_cake_points_recompute_from_their_allocation(seed, rng):
    dec = random_dec(np.random.default_rng(seed), K=3)
    budget = 10.0 ** np.random.default_rng(seed).uniform(-0.5, 1.5)
    curve = sweep(dec, budget, 41)
    for i in range(0, 41, 7):
        point = curve.point(i)
        rates = zfdpc_rates(dec, point.alloc)
        assert np.abs(rates - point.rates).max() <= 1e-10
        assert point.sum_rate == pytest.approx(rates.sum(), abs=1e-10)
        assert point.fairness == pytest.approx(
            l1_fairness(normalize(rates)), abs=1e-10)
        assert point.alloc.powers.sum() <= budget + 1e-9 * max(budget, 1.0)


def test_sweep_grid_of_two_is_exactly_the_endpoints():
    dec = dec_with_gains([0.7, 1.9])
    curve = sweep(dec, 4.0, 2)
    assert curve.grid_size == 2
    assert np.array_equal(curve.c, [0.0, 1.0])
    assert np.array_equal(curve.allocs[0], max_sum_rate(dec.effective_gains, 4.0).alloc.powers)
    assert np.array_equal(curve.allocs[1], max_min(dec.effective_gains, 4.0).alloc.powers)


def test_sweep_is_deterministic_and_boundary_dominant(rng):
    dec = random_dec(rng)
    curve_a = sweep(dec, 2.0, 201)
    curve_b = sweep(dec, 2.0, 201)
    assert np.array_equal(curve_a.sum_rates, curve_b.sum_rates)
    assert np.array_equal(curve_a.fairness, curve_b.fairness)
    assert curve_a.fairness[-1] == pytest.approx(1.0, abs=1e-12)
    assert curve_a.sum_rates[0] == curve_a.sum_rates.max()


def test_mix_hand_hull():
    curve = synthetic_curve([(1.0, 0.5), (2.0, 1.0), (3.0, 0.2)])
    assert list(curve.hull_idx) == [0, 1, 2]
    assert curve.f_max(2.5) == pytest.approx(0.6, abs=1e-12)
    mixer = curve.mixer_at(2.5)
    assert mixer.atoms == (1, 2)
    assert mixer.weights[0] == pytest.approx(0.5, abs=1e-12)


def test_mix_keeps_monotone_concave_grid():
    pts = [(1.0, 0.9), (2.0, 0.7), (3.0, 0.4), (4.0, 0.0)]
    curve = synthetic_curve(pts)
    assert list(curve.hull_idx) == [0, 1, 2, 3]
    for r, f in pts:
        mixer = curve.mixer_at(r)
        assert mixer.degenerate


def test_mix_rejects_coincident_grid():
    with pytest.raises(DegenerateCurve):
        synthetic_curve([(1.0, 0.5)] * 5)


@pytest.mark.parametrize("seed", range(20))
def test_hull_dominates_raw_curve(seed):
    dec = random_dec(np.random.default_rng(1000 + seed))
    budget = 10.0 ** np.random.default_rng(seed).uniform(-0.5, 1.5)
    curve = mix(sweep(dec, budget, 101))
    curve.validate()
    for i in range(curve.grid_size):
        assert curve.f_max(float(curve.sum_rates[i])) >= curve.fairness[i] - 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_mixer_expectation_reproduces_hull(seed):
    rng = np.random.default_rng(2000 + seed)
    dec = random_dec(rng, K=3)
    curve = mix(sweep(dec, 5.0, 101))
    lo, hi = curve.hull_sum_rates[0], curve.hull_sum_rates[-1]
    for q in rng.uniform(lo, hi, size=20):
        mixer = curve.mixer_at(float(q))
        (a, b), (wa, wb) = mixer.atoms, mixer.weights
        r_mix = wa * curve.sum_rates[a] + wb * curve.sum_rates[b]
        f_mix = wa * curve.fairness[a] + wb * curve.fairness[b]
        assert abs(r_mix - q) <= 1e-10 * max(1.0, abs(q))
        assert abs(f_mix - curve.f_max(float(q))) <= 1e-10


def test_select_spec_oracle_case():
    # Single-segment hull from (2, 1.0) to (3, 0.2); pf pair below it.
    curve = synthetic_curve([(2.0, 1.0), (3.0, 0.2)])
    op = select(curve, (2.4, 0.5))
    assert not op.fallback_used
    _, (ox, oy) = nearest_on_polyline([(2.0, 1.0), (3.0, 0.2)], (2.4, 0.5))
    assert abs(op.sum_rate - ox) <= 1e-4
    assert abs(op.fairness - oy) <= 1e-4
    # Selected point beats the pf pair in both coordinates here.
    assert op.sum_rate >= 2.4 and op.fairness >= 0.5


def test_select_fallback_when_pf_beats_the_hull():
    curve = synthetic_curve([(2.0, 0.6), (3.0, 0.2)])
    op = select(curve, (2.5, 0.9))
    assert op.fallback_used
    assert (op.sum_rate, op.fairness) == (2.5, 0.9)
    assert op.mixer is None
    out_of_range = select(curve, (5.0, 0.1))
    assert out_of_range.fallback_used


@pytest.mark.parametrize("seed", range(25))
def test_select_against_dense_polyline_search(seed):
    rng = np.random.default_rng(3000 + seed)
    dec = random_dec(rng)
    budget = 10.0 ** rng.uniform(-0.5, 1.5)
    curve = mix(sweep(dec, budget, 101))
    pf = proportional_fair(dec.effective_gains, budget)
    pf_pair = (pf.sum_rate, l1_fairness(normalize(pf.rates)))
    op = select(curve, pf_pair)
    if op.fallback_used:
        return
    vertices = list(zip(curve.hull_sum_rates, curve.hull_fairness))
    d_oracle, _ = nearest_on_polyline(vertices, pf_pair, steps_per_segment=10_001)
    d_ours = (op.sum_rate - pf_pair[0]) ** 2 + (op.fairness - pf_pair[1]) ** 2
    assert d_ours <= d_oracle + 1e-8
    # Never strictly worse than pf in both coordinates.
    assert op.sum_rate >= pf_pair[0] - 1e-12 or op.fairness >= pf_pair[1] - 1e-12
    # The selected pair sits on the hull.
    assert op.fairness == pytest.approx(curve.f_max(op.sum_rate), abs=1e-12)


def test_select_normalized_distance_option():
    curve = synthetic_curve([(2.0, 1.0), (3.0, 0.2)])
    raw = select(curve, (2.4, 0.5))
    scaled = select(curve, (2.4, 0.5), normalize_rate=True)
    # Rate deviations become cheap, so the projection slides toward matching
    # the pf fairness at a higher rate.
    assert scaled.sum_rate > raw.sum_rate
    assert scaled.fairness < raw.fairness
    assert scaled.fairness >= 0.5 - 1e-12


def test_sampling_degenerate_mixer_returns_identical_allocations():
    dec = dec_with_gains([1.0, 0.25])
    curve = mix(sweep(dec, 3.0, 51))
    target = float(curve.hull_sum_rates[0])
    op = OperatingPoint(target, curve.f_max(target), curve.mixer_at(target), False)
    assert op.mixer.degenerate
    allocs = sample_allocation(op, curve, dec, 3.0, 100, seed=5)
    ref = allocs[0].powers
    assert all(np.array_equal(a.powers, ref) for a in allocs)


def test_sampling_determinism_and_convergence():
    rng = np.random.default_rng(77)
    dec = random_dec(rng)
    budget = 5.0
    curve = mix(sweep(dec, budget, 101))
    pf = proportional_fair(dec.effective_gains, budget)
    op = select(curve, (pf.sum_rate, l1_fairness(normalize(pf.rates))))
    assert not op.fallback_used
    n = 10_000
    a = sample_allocation(op, curve, dec, budget, n, seed=42)
    b = sample_allocation(op, curve, dec, budget, n, seed=42)
    assert all(np.array_equal(x.powers, y.powers) for x, y in zip(a, b))

    draws_r = np.array([zfdpc_rates(dec, al).sum() for al in a])
    draws_f = np.array([l1_fairness_of(zfdpc_rates(dec, al)) for al in a])
    (i, j), (wi, _) = op.mixer.atoms, op.mixer.weights
    spread = abs(curve.sum_rates[i] - curve.sum_rates[j])
    sigma_r = spread * np.sqrt(wi * (1.0 - wi))
    spread_f = abs(curve.fairness[i] - curve.fairness[j])
    sigma_f = spread_f * np.sqrt(wi * (1.0 - wi))
    assert abs(draws_r.mean() - op.sum_rate) <= 3.0 * sigma_r / np.sqrt(n) + 1e-12
    assert abs(draws_f.mean() - op.fairness) <= 3.0 * sigma_f / np.sqrt(n) + 1e-12


def test_sampling_rejects_fallback_points():
    curve = synthetic_curve([(2.0, 0.6), (3.0, 0.2)])
    op = OperatingPoint(2.5, 0.9, None, True)
    dec = dec_with_gains([1.0, 0.25])
    with pytest.raises(ValueError):
        sample_allocation(op, curve, dec, 1.0, 10, seed=1)


def test_curve_json_round_trip(tmp_path):
    dec = dec_with_gains([1.3, 0.4])
    curve = mix(sweep(dec, 2.0, 21))
    path = tmp_path / "curve.json"
    curve.write_json(path)
    import json

    with open(path, encoding="utf-8") as fh:
        back = TradeoffCurve.from_json(json.load(fh))
    assert np.array_equal(back.sum_rates, curve.sum_rates)
    assert np.array_equal(back.hull_idx, curve.hull_idx)
    back.validate()
    assert back.f_max(float(curve.hull_sum_rates[0])) == curve.f_max(float(curve.hull_sum_rates[0]))


def test_curve_csv_has_rate_and_fairness_columns(tmp_path):
    dec = dec_with_gains([1.3, 0.4])
    curve = sweep(dec, 2.0, 11)
    path = tmp_path / "curve.csv"
    curve.write_csv(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "sum_rate,fairness"
    assert len(lines) == 12
    r, f = map(float, lines[1].split(","))
    assert r == curve.sum_rates[0] and f == curve.fairness[0]
