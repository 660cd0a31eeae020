"""Power-allocation solvers for the four qualitative design objectives.

All four act on the effective scalar gains g_k = |l_kk|^2 of a zero-forcing
decomposition, where user rates are log2(1 + p_k g_k):

* max_sum_rate  -- water-filling, optionally on top of a baseline allocation
* proportional_fair -- Nash bargaining objective sum_k log(rate_k)
* harmonic_mean -- minimize sum_k 1/rate_k
* max_min       -- equalize all rates (closed form)

The sum-rate maximizer is exact (sort-and-check water level). The two smooth
fairness objectives run projected gradient ascent with Armijo backtracking on
the capped simplex, started from the equal-rate point so no rate is ever zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fairshare._backend import kernels as _k
from fairshare.channel import PowerAllocation
from fairshare.errors import InfeasibleFairness

#: Projected-gradient norm at which the smooth solvers stop.
KKT_TOL = 1e-9

#: Iteration cap for the smooth solvers; the residual is reported either way.
MAX_ITER = 10_000

_LOG2 = float(np.log(2.0))


@dataclass(frozen=True)
class AllocationResult:
    """Solver output: the allocation, its rates and solver diagnostics.

    `rates` are evaluated at the effective powers (allocated plus baseline,
    when a baseline was given), so sum_rate is the objective-relevant total.
    """

    alloc: PowerAllocation
    rates: np.ndarray
    sum_rate: float
    kkt_residual: float
    iterations: int


def _as_gains(g) -> np.ndarray:
    g = np.ascontiguousarray(g, dtype=np.float64)
    if g.ndim != 1 or g.shape[0] < 1:
        raise ValueError("gains must be a nonempty 1-D vector")
    if np.any(g < 0.0) or not np.all(np.isfinite(g)):
        raise ValueError("gains must be finite and nonnegative")
    return g


def _require_positive_gains(g: np.ndarray, objective: str) -> None:
    if np.any(g == 0.0):
        raise InfeasibleFairness(
            f"{objective} is degenerate when some gain is zero (that user's rate "
            "is 0 at any power)"
        )


def _result(p: np.ndarray, g: np.ndarray, budget: float, baseline,
            residual: float, iterations: int) -> AllocationResult:
    effective = p if baseline is None else p + baseline
    rates = np.log1p(effective * g) / _LOG2
    return AllocationResult(
        alloc=PowerAllocation(powers=p, budget=float(budget)),
        rates=rates,
        sum_rate=float(rates.sum()),
        kkt_residual=float(residual),
        iterations=int(iterations),
    )


def max_sum_rate(g, budget: float, baseline=None) -> AllocationResult:
    """Water-filling: maximize the sum rate over the power budget.

    With a baseline allocation b, maximizes sum_k log2(1 + (p_k + b_k) g_k)
    over sum(p) <= budget, p >= 0, i.e. distributes *additional* power on top
    of powers already committed. Zero-gain users silently receive nothing.
    """
    g = _as_gains(g)
    if budget < 0.0:
        raise ValueError("budget must be nonnegative")
    if baseline is None:
        base = np.zeros_like(g)
    else:
        base = np.ascontiguousarray(baseline, dtype=np.float64)
        if base.shape != g.shape or np.any(base < 0.0):
            raise ValueError("baseline must be nonnegative and match the gains")
    p, _, residual = _k.waterfill(g, float(budget), base)
    return _result(p, g, budget, base if baseline is not None else None, residual, 0)


def proportional_fair(g, budget: float) -> AllocationResult:
    """Maximize sum_k log(rate_k): the generalized Nash bargaining solution.

    At the optimum any feasible reallocation has nonpositive aggregate
    proportional rate change. Requires every gain positive, otherwise the
    objective is identically -inf.
    """
    g = _as_gains(g)
    if budget <= 0.0:
        raise ValueError("budget must be positive")
    _require_positive_gains(g, "proportional fairness")
    p, residual, iterations = _k.pf_solve(g, float(budget), KKT_TOL, MAX_ITER)
    return _result(p, g, budget, None, residual, iterations)


def harmonic_mean(g, budget: float) -> AllocationResult:
    """Maximize the harmonic mean of the rates (minimize sum_k 1/rate_k)."""
    g = _as_gains(g)
    if budget <= 0.0:
        raise ValueError("budget must be positive")
    _require_positive_gains(g, "harmonic-mean fairness")
    p, residual, iterations = _k.hm_solve(g, float(budget), KKT_TOL, MAX_ITER)
    return _result(p, g, budget, None, residual, iterations)


def max_min(g, budget: float) -> AllocationResult:
    """Maximize the minimum rate; closed form p_k proportional to 1/g_k.

    All resulting rates are equal: p_k g_k is the same for every user.
    """
    g = _as_gains(g)
    if budget < 0.0:
        raise ValueError("budget must be nonnegative")
    _require_positive_gains(g, "max-min fairness")
    p = _k.maxmin_alloc(g, float(budget))
    return _result(p, g, budget, None, 0.0, 0)
