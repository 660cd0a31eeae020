"""Multi-block (ergodic) evaluation and the non-causal rate-split bound.

Blocks are i.i.d. quasi-static channel draws. Each block runs one allocation
criterion; ensemble averages estimate the long-run (sum rate, fairness) pair
of that criterion. The rate-split bound answers a stronger question: knowing
all blocks in advance, how fair could any per-block sum-rate assignment be on
average, subject to a fixed average sum rate? Because every per-block
envelope is concave piecewise-linear, the coupled problem decomposes exactly:
a single multiplier prices rate across blocks and bisection finds the price
at which the blocks' individually optimal rates meet the average target.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from fairshare import allocators, fairness, tristage
from fairshare.channel import sample_channel, zfdpc_decompose, zfdpc_rates
from fairshare.errors import InfeasibleTarget
from fairshare.tristage import TradeoffCurve

#: Supported allocation criteria, in canonical reporting order.
CRITERIA = ("max_sum", "pf", "hm", "max_min", "tristage")

#: Give up after this many redraws of a single rank-deficient block.
MAX_RESAMPLE = 100

_BISECT_ITER = 200


@dataclass(frozen=True)
class EnsembleResult:
    """Ensemble means of one criterion over n_blocks independent channel draws."""

    criterion: str
    avg_sum_rate: float
    avg_fairness_l1: float
    avg_fairness_jain: float
    n_blocks: int
    P_dB: float
    K: int
    N: int
    seed: int
    n_resampled: int = 0
    n_fallback: int = 0


@dataclass(frozen=True)
class UpperBoundCurve:
    """Non-causal tradeoff bound: best average fairness per average sum rate."""

    avg_sum_rates: np.ndarray
    fairness_bound: np.ndarray
    n_blocks: int
    envelopes: tuple


@dataclass(frozen=True)
class BoundDominanceReport:
    """Gap between the rate-split bound and an achieved tristage ensemble."""

    avg_sum_rate: float
    avg_fairness: float
    bound_fairness: float
    gap: float
    n_blocks: int
    n_fallback: int


def db_to_linear(p_db: float) -> float:
    """Convert a power budget from dB (relative to unit noise) to linear units."""
    return float(10.0 ** (p_db / 10.0))


def block_seed(master_seed: int, block: int, attempt: int = 0) -> np.random.SeedSequence:
    """Deterministic per-block seed derivation; blocks are order-independent."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(block, attempt))


def thread_count() -> int:
    """Worker threads for ensemble maps, capped by FAIRSHARE_THREADS (default 1)."""
    raw = os.environ.get("FAIRSHARE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _kahan_mean(values) -> float:
    total = 0.0
    comp = 0.0
    count = 0
    for v in values:
        count += 1
        y = float(v) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total / count


def _map_blocks(fn, n_blocks: int):
    threads = thread_count()
    if threads <= 1:
        return [fn(i) for i in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_blocks)))


def _draw_block(K: int, N: int, master_seed: int, block: int):
    """Sample a channel for one block, redrawing on rank deficiency."""
    for attempt in range(MAX_RESAMPLE):
        H = sample_channel(K, N, block_seed(master_seed, block, attempt))
        dec = zfdpc_decompose(H)
        if not dec.rank_deficient:
            return dec, attempt
    raise RuntimeError(
        f"block {block}: still rank-deficient after {MAX_RESAMPLE} redraws"
    )


_SIMPLE_SOLVERS = {
    "max_sum": lambda g, P: allocators.max_sum_rate(g, P),
    "pf": allocators.proportional_fair,
    "hm": allocators.harmonic_mean,
    "max_min": allocators.max_min,
}


def _fairness_pair(rates, single_user_fairness):
    if rates.shape[0] == 1 and single_user_fairness is not None:
        return float(single_user_fairness), 1.0
    gamma = fairness.normalize(rates)
    return fairness.l1_fairness(gamma), fairness.jain_index(gamma)


def _tristage_block(dec, budget: float, c_grid: int):
    """Run the three-stage pipeline; returns metrics plus the block envelope."""
    g = dec.effective_gains
    pf_res = allocators.proportional_fair(g, budget)
    gamma_pf = fairness.normalize(pf_res.rates)
    pf_pair = (pf_res.sum_rate, fairness.l1_fairness(gamma_pf))
    curve = tristage.mix(tristage.sweep(dec, budget, c_grid))
    op = tristage.select(curve, pf_pair)
    envelope = (curve.hull_sum_rates.copy(), curve.hull_fairness.copy())
    if op.fallback_used:
        jain = fairness.jain_index(gamma_pf)
        return op.sum_rate, op.fairness, jain, True, envelope
    (a, b), (wa, wb) = op.mixer.atoms, op.mixer.weights
    jain = wa * fairness.jain_index(fairness.normalize(curve.rates[a]))
    jain += wb * fairness.jain_index(fairness.normalize(curve.rates[b]))
    return op.sum_rate, op.fairness, jain, False, envelope


def run_ensemble(criterion: str, K: int, N: int, P_dB: float, n_blocks: int,
                 seed: int, *, c_grid: int = tristage.DEFAULT_GRID,
                 single_user_fairness: float | None = None) -> EnsembleResult:
    """Average (sum rate, fairness) of one criterion over seeded channel draws.

    Deterministic given the seed; rank-deficient draws are replaced and
    counted in `n_resampled`. For tristage, each block contributes the
    selected operating point of its own tradeoff curve. With K = 1 the l1
    measure is undefined; pass `single_user_fairness` (the CLI uses 1.0) to
    substitute a convention instead of raising.
    """
    result, _ = _run_ensemble_impl(criterion, K, N, P_dB, n_blocks, seed,
                                   c_grid=c_grid,
                                   single_user_fairness=single_user_fairness,
                                   keep_envelopes=False)
    return result


def run_tristage_ensemble(K: int, N: int, P_dB: float, n_blocks: int, seed: int,
                          *, c_grid: int = tristage.DEFAULT_GRID):
    """Tristage ensemble that also returns the per-block tradeoff envelopes.

    The envelopes, one (sum rate, fairness) vertex array pair per block, feed
    the rate-split bound on exactly the same blocks.
    """
    return _run_ensemble_impl("tristage", K, N, P_dB, n_blocks, seed,
                              c_grid=c_grid, single_user_fairness=None,
                              keep_envelopes=True)


def _run_ensemble_impl(criterion, K, N, P_dB, n_blocks, seed, *, c_grid,
                       single_user_fairness, keep_envelopes):
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    if n_blocks < 1:
        raise ValueError("n_blocks must be at least 1")
    budget = db_to_linear(P_dB)

    def worker(block: int):
        dec, redraws = _draw_block(K, N, seed, block)
        if criterion == "tristage":
            r, f, j, fell_back, envelope = _tristage_block(dec, budget, c_grid)
            return r, f, j, redraws, int(fell_back), envelope
        res = _SIMPLE_SOLVERS[criterion](dec.effective_gains, budget)
        f, j = _fairness_pair(res.rates, single_user_fairness)
        return res.sum_rate, f, j, redraws, 0, None

    rows = _map_blocks(worker, n_blocks)
    result = EnsembleResult(
        criterion=criterion,
        avg_sum_rate=_kahan_mean(row[0] for row in rows),
        avg_fairness_l1=_kahan_mean(row[1] for row in rows),
        avg_fairness_jain=_kahan_mean(row[2] for row in rows),
        n_blocks=n_blocks,
        P_dB=float(P_dB),
        K=K,
        N=N,
        seed=seed,
        n_resampled=sum(row[3] for row in rows),
        n_fallback=sum(row[4] for row in rows),
    )
    envelopes = tuple(row[5] for row in rows) if keep_envelopes else ()
    return result, envelopes


def _envelope_arrays(block):
    """Accept a mixed TradeoffCurve or a bare (rates, fairness) vertex pair."""
    if isinstance(block, TradeoffCurve):
        return np.asarray(block.hull_sum_rates, dtype=np.float64), \
            np.asarray(block.hull_fairness, dtype=np.float64)
    r, f = block
    return np.asarray(r, dtype=np.float64), np.asarray(f, dtype=np.float64)


def rate_split_bound(blocks, target_avg_rate: float) -> float:
    """Best average fairness over per-block sum-rate splits meeting a rate target.

    `blocks` are per-block tradeoff curves (mixed TradeoffCurve objects or
    bare (vertex rates, vertex fairness) pairs). Maximizes the mean of the
    per-block envelope values subject to the mean of per-block sum rates
    equaling `target_avg_rate`. Solved by Lagrangian decomposition: for a
    rate price lam each block independently picks the envelope vertex
    maximizing F - lam*R (a vertex scan, the envelopes being concave
    piecewise-linear), and bisection on lam enforces the coupling constraint;
    segments priced exactly at lam absorb the fractional remainder.
    """
    hulls = [_envelope_arrays(b) for b in blocks]
    if not hulls:
        raise ValueError("need at least one block")
    L = len(hulls)
    total = float(target_avg_rate) * L

    r_lo = sum(float(r[0]) for r, _ in hulls)
    r_hi = sum(float(r[-1]) for r, _ in hulls)
    slack = 1e-9 * max(1.0, abs(total))
    if total < r_lo - slack or total > r_hi + slack:
        raise InfeasibleTarget(
            f"average rate {target_avg_rate:.12g} outside achievable range "
            f"[{r_lo / L:.12g}, {r_hi / L:.12g}]"
        )
    total = min(max(total, r_lo), r_hi)

    if L == 1:
        r, f = hulls[0]
        return float(np.interp(total, r, f))

    n_vertices = max(r.shape[0] for r, _ in hulls)
    rates = np.zeros((L, n_vertices))
    fair = np.full((L, n_vertices), -np.inf)
    for i, (r, f) in enumerate(hulls):
        rates[i, : r.shape[0]] = r
        fair[i, : r.shape[0]] = f

    slope_lo = np.inf
    slope_hi = -np.inf
    for r, f in hulls:
        if r.shape[0] >= 2:
            slopes = np.diff(f) / np.diff(r)
            slope_lo = min(slope_lo, float(slopes.min()))
            slope_hi = max(slope_hi, float(slopes.max()))
    if not np.isfinite(slope_lo):
        # Every block is a single vertex; the split is forced.
        return _kahan_mean(float(f[0]) for _, f in hulls)
    lam_lo = slope_lo - 1.0
    lam_hi = slope_hi + 1.0

    def max_rate_at(lam: float) -> float:
        vals = fair - lam * rates
        best = vals.max(axis=1)
        return float(np.where(vals == best[:, None], rates, -np.inf).max(axis=1).sum())

    for _ in range(_BISECT_ITER):
        mid = 0.5 * (lam_lo + lam_hi)
        if mid <= lam_lo or mid >= lam_hi:
            break
        if max_rate_at(mid) >= total:
            lam_lo = mid
        else:
            lam_hi = mid

    lam = lam_lo
    # Near-ties within float noise of the scoring are part of the optimal set.
    vals = fair - lam * rates
    best = vals.max(axis=1)
    tie = vals >= (best - 64.0 * np.finfo(np.float64).eps * np.maximum(1.0, np.abs(best)))[:, None]
    r_min = np.where(tie, rates, np.inf).min(axis=1)
    r_max = np.where(tie, rates, -np.inf).max(axis=1)
    f_at_min = fair[np.arange(L), np.where(tie, rates, np.inf).argmin(axis=1)]

    base_rate = float(r_min.sum())
    objective = float(f_at_min.sum())
    remainder = max(total - base_rate, 0.0)
    for cap in r_max - r_min:
        if remainder <= 0.0:
            break
        take = min(float(cap), remainder)
        objective += lam * take
        remainder -= take
    if remainder > 1e-6 * max(1.0, abs(total)):
        raise RuntimeError("rate-split pricing failed to meet the coupling constraint")
    return objective / L


def upper_bound_curve(blocks, n_points: int = 33) -> UpperBoundCurve:
    """Sweep the rate-split bound over the achievable average-rate range."""
    hulls = [_envelope_arrays(b) for b in blocks]
    L = len(hulls)
    lo = sum(float(r[0]) for r, _ in hulls) / L
    hi = sum(float(r[-1]) for r, _ in hulls) / L
    targets = np.linspace(lo, hi, n_points)
    values = np.array([rate_split_bound(hulls, t) for t in targets])
    return UpperBoundCurve(
        avg_sum_rates=targets,
        fairness_bound=values,
        n_blocks=L,
        envelopes=tuple(hulls),
    )


def bound_dominance_report(ensemble: EnsembleResult, blocks) -> BoundDominanceReport:
    """Compare a tristage ensemble against the bound built from the same blocks.

    The per-block tristage selections form one feasible rate split, so the
    bound evaluated at the achieved average rate can fall below the achieved
    average fairness only through fallback blocks (whose pf pair sits above
    their envelope) or float noise.
    """
    if ensemble.criterion != "tristage":
        raise ValueError("dominance report expects a tristage ensemble")
    bound_value = rate_split_bound(blocks, ensemble.avg_sum_rate)
    return BoundDominanceReport(
        avg_sum_rate=ensemble.avg_sum_rate,
        avg_fairness=ensemble.avg_fairness_l1,
        bound_fairness=bound_value,
        gap=bound_value - ensemble.avg_fairness_l1,
        n_blocks=ensemble.n_blocks,
        n_fallback=ensemble.n_fallback,
    )
