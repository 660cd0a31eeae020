"""Pure-numpy implementations of the hot numerical kernels.

This module is the fallback backend; `fairshare._kernels` (compiled) mirrors
the same signatures and semantics. Inputs are 1-D float64 arrays of channel
power gains unless stated otherwise; nothing here validates arguments, the
public modules do.
"""

import numpy as np

LN2 = float(np.log(2.0))

_ARMIJO_SIGMA = 1e-4
_STEP_MAX = 1e12
_STEP_MIN = 1e-20


def waterfill(g, budget, baseline):
    """Water-filling over channels with per-channel power floors.

    Maximizes sum_k log(1 + (p_k + baseline_k) g_k) subject to sum(p) <= budget,
    p >= 0. Channels with g_k = 0 receive nothing.

    Returns (p, level, residual) where `level` is the common water level and
    `residual` bounds the violation of the KKT conditions.
    """
    g = np.asarray(g, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    K = g.shape[0]
    p = np.zeros(K)
    active = g > 0.0
    if budget <= 0.0 or not active.any():
        return p, float("nan"), 0.0

    # Effective floor of each active channel: inverse gain plus preallocated power.
    floors = np.full(K, np.inf)
    floors[active] = 1.0 / g[active] + baseline[active]
    fs = np.sort(floors[active])
    m = np.arange(1, fs.shape[0] + 1)
    level_cand = (budget + np.cumsum(fs)) / m
    valid = (level_cand >= fs) & np.isfinite(fs)
    level = float(level_cand[np.nonzero(valid)[0][-1]])
    p = np.maximum(0.0, level - floors)

    used = float(p.sum())
    # Complementary slackness: filled channels sit at the water level, dry
    # channels have floors at or above it.
    recon = np.where(
        p[active] > 0.0,
        np.abs((p[active] + floors[active]) - level),
        np.maximum(0.0, level - floors[active]),
    )
    residual = max(abs(used - budget) / max(budget, 1.0), float(recon.max()))
    return p, level, residual


def maxmin_alloc(g, budget):
    """Closed-form equal-rate allocation: power inversely proportional to gain."""
    g = np.asarray(g, dtype=np.float64)
    inv_g = 1.0 / g
    scale = budget / inv_g.sum()
    return scale * inv_g


def cake_sweep(g, budget, c_values):
    """Two-step split allocation evaluated on a grid of splitting factors.

    For each c: fraction c of the budget goes to the equal-rate allocation,
    the rest is water-filled on top of it. Returns (allocs, rates, sum_rates,
    fairness) with one row per grid point; fairness is the l1-based measure
    of the normalized rates. Requires all g > 0 and K >= 2.
    """
    g = np.asarray(g, dtype=np.float64)
    c_values = np.asarray(c_values, dtype=np.float64)
    K = g.shape[0]

    inv_g = 1.0 / g
    s_inv = inv_g.sum()
    scale = c_values * budget / s_inv
    p1 = scale[:, None] * inv_g[None, :]

    floors = inv_g[None, :] + p1
    budgets = (1.0 - c_values) * budget

    fs = np.sort(floors, axis=1)
    m = np.arange(1, K + 1)
    level_cand = (budgets[:, None] + np.cumsum(fs, axis=1)) / m[None, :]
    valid = level_cand >= fs
    last_valid = K - 1 - np.argmax(valid[:, ::-1], axis=1)
    levels = np.take_along_axis(level_cand, last_valid[:, None], axis=1)
    p2 = np.maximum(0.0, levels - floors)

    allocs = p1 + p2
    rates = np.log1p(allocs * g[None, :]) / LN2
    sum_rates = rates.sum(axis=1)
    gamma = rates / sum_rates[:, None]
    l1 = np.abs(gamma - 1.0 / K).sum(axis=1)
    fairness = 1.0 - (K / (2.0 * (K - 1.0))) * l1
    return allocs, rates, sum_rates, fairness


def _project_budget(x, budget):
    """Euclidean projection onto {p >= 0, sum(p) <= budget}."""
    y = np.maximum(x, 0.0)
    if y.sum() <= budget:
        return y
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - budget
    j = np.arange(1, x.shape[0] + 1)
    rho = np.nonzero(u - css / j > 0.0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(x - tau, 0.0)


def _pf_value_grad(p, g):
    x = p * g
    rates_ln = np.log1p(x)
    if np.any(rates_ln <= 0.0):
        return -np.inf, None
    value = float(np.log(rates_ln).sum())
    grad = g / (rates_ln * (1.0 + x))
    return value, grad


def _hm_value_grad(p, g):
    x = p * g
    rates_ln = np.log1p(x)
    if np.any(rates_ln <= 0.0):
        return -np.inf, None
    value = float(-(LN2 / rates_ln).sum())
    grad = LN2 * g / (rates_ln * rates_ln * (1.0 + x))
    return value, grad


def _projected_ascent(value_grad, g, budget, tol, max_iter):
    """Projected gradient ascent with Armijo backtracking on the capped simplex.

    Started from the equal-rate point so every rate is strictly positive.
    Convergence is measured by the unit-step projected-gradient norm. Once the
    predicted increase drops below float resolution of the objective, the
    Armijo test can no longer discriminate; from there a step is accepted only
    if it strictly shrinks the residual, which rules out noise-level orbits
    around the optimum.
    """
    p = maxmin_alloc(g, budget)
    value, grad = value_grad(p, g)
    step = 1.0
    iterations = 0
    residual = float(np.linalg.norm(_project_budget(p + grad, budget) - p))
    prev_p = None
    prev_grad = None

    while iterations < max_iter and residual > tol:
        iterations += 1
        # Spectral (Barzilai-Borwein) trial step; fall back to doubling.
        step = min(step * 2.0, _STEP_MAX)
        if prev_p is not None:
            s = p - prev_p
            curvature = -float(np.dot(s, grad - prev_grad))
            if curvature > 0.0:
                step = min(max(float(np.dot(s, s)) / curvature, _STEP_MIN), _STEP_MAX)
        prev_p, prev_grad = p, grad
        moved = False
        while step >= _STEP_MIN:
            cand = _project_budget(p + step * grad, budget)
            d = cand - p
            if not d.any():
                break
            predicted = float(np.dot(grad, d))
            cand_value, cand_grad = value_grad(cand, g)
            if cand_grad is not None:
                noise_floor = 16.0 * np.finfo(np.float64).eps * max(abs(value), 1.0)
                if _ARMIJO_SIGMA * predicted >= noise_floor:
                    accept = cand_value >= value + _ARMIJO_SIGMA * predicted
                    cand_residual = None
                else:
                    cand_residual = float(
                        np.linalg.norm(_project_budget(cand + cand_grad, budget) - cand)
                    )
                    accept = cand_residual < residual
                if accept:
                    p, value, grad = cand, cand_value, cand_grad
                    if cand_residual is None:
                        cand_residual = float(
                            np.linalg.norm(_project_budget(p + grad, budget) - p)
                        )
                    residual = cand_residual
                    moved = True
                    break
            step *= 0.5
        if not moved:
            break

    return p, residual, iterations


def pf_solve(g, budget, tol, max_iter):
    """Proportional fairness: maximize sum_k log(rate_k) over the power budget."""
    g = np.asarray(g, dtype=np.float64)
    return _projected_ascent(_pf_value_grad, g, budget, tol, max_iter)


def hm_solve(g, budget, tol, max_iter):
    """Harmonic-mean rate maximization: minimize sum_k 1/rate_k over the budget."""
    g = np.asarray(g, dtype=np.float64)
    return _projected_ascent(_hm_value_grad, g, budget, tol, max_iter)


def upper_hull_idx(x, y):
    """Indices of the upper concave envelope vertices of points sorted by x.

    `x` must be strictly increasing. Collinear interior points are dropped.
    """
    n = x.shape[0]
    if n <= 2:
        return np.arange(n, dtype=np.intp)
    stack = [0, 1]
    for i in range(2, n):
        while len(stack) >= 2:
            a, b = stack[-2], stack[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross >= 0.0:
                stack.pop()
            else:
                break
        stack.append(i)
    return np.array(stack, dtype=np.intp)
