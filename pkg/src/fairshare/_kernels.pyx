# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot numerical kernels.

Mirrors `fairshare._kernels_py` function for function; see that module for
the reference semantics.
"""

from libc.math cimport INFINITY, NAN, fabs, isfinite, log, log1p, sqrt

import numpy as np

LN2 = float(np.log(2.0))

cdef double _LN2 = 0.6931471805599453
cdef double _ARMIJO_SIGMA = 1e-4
cdef double _STEP_MAX = 1e12
cdef double _STEP_MIN = 1e-20
cdef double _EPS = 2.220446049250313e-16


cdef void _sort_ascending(double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


cdef double _waterfill_level(double* floors, double* scratch, Py_ssize_t n,
                             double budget) noexcept nogil:
    """Water level for channels with the given floors (all finite, n >= 1)."""
    cdef Py_ssize_t m, best = 0
    cdef double cum = 0.0, cand
    cdef double level = floors[0] + budget
    for m in range(n):
        scratch[m] = floors[m]
    _sort_ascending(scratch, n)
    for m in range(n):
        cum += scratch[m]
        cand = (budget + cum) / (m + 1)
        if cand >= scratch[m]:
            level = cand
    return level


def waterfill(object g_in, double budget, object baseline_in):
    """Water-filling over channels with per-channel power floors.

    Maximizes sum_k log(1 + (p_k + baseline_k) g_k) subject to sum(p) <= budget,
    p >= 0. Channels with g_k = 0 receive nothing.

    Returns (p, level, residual) where `level` is the common water level and
    `residual` bounds the violation of the KKT conditions.
    """
    cdef double[::1] g = np.ascontiguousarray(g_in, dtype=np.float64)
    cdef double[::1] baseline = np.ascontiguousarray(baseline_in, dtype=np.float64)
    cdef Py_ssize_t K = g.shape[0]
    p_arr = np.zeros(K)
    cdef double[::1] p = p_arr
    cdef Py_ssize_t k, n_active = 0
    cdef double level, used = 0.0, stationarity = 0.0, target, residual

    for k in range(K):
        if g[k] > 0.0:
            n_active += 1
    if budget <= 0.0 or n_active == 0:
        return p_arr, float("nan"), 0.0

    floors_arr = np.empty(n_active)
    scratch_arr = np.empty(n_active)
    cdef double[::1] floors = floors_arr
    cdef double[::1] scratch = scratch_arr
    cdef Py_ssize_t i = 0
    with nogil:
        for k in range(K):
            if g[k] > 0.0:
                floors[i] = 1.0 / g[k] + baseline[k]
                i += 1
        level = _waterfill_level(&floors[0], &scratch[0], n_active, budget)
        i = 0
        # Complementary slackness: filled channels sit at the water level, dry
        # channels have floors at or above it.
        for k in range(K):
            if g[k] > 0.0:
                p[k] = level - floors[i]
                if p[k] < 0.0:
                    p[k] = 0.0
                if p[k] > 0.0:
                    target = fabs((p[k] + floors[i]) - level)
                else:
                    target = level - floors[i]
                    if target < 0.0:
                        target = 0.0
                if target > stationarity:
                    stationarity = target
                i += 1
            used += p[k]
    residual = fabs(used - budget) / (budget if budget > 1.0 else 1.0)
    if stationarity > residual:
        residual = stationarity
    return p_arr, level, residual


def maxmin_alloc(object g_in, double budget):
    """Closed-form equal-rate allocation: power inversely proportional to gain."""
    cdef double[::1] g = np.ascontiguousarray(g_in, dtype=np.float64)
    cdef Py_ssize_t K = g.shape[0]
    p_arr = np.empty(K)
    cdef double[::1] p = p_arr
    cdef Py_ssize_t k
    cdef double s_inv = 0.0, scale
    with nogil:
        for k in range(K):
            p[k] = 1.0 / g[k]
            s_inv += p[k]
        scale = budget / s_inv
        for k in range(K):
            p[k] = scale * p[k]
    return p_arr


def cake_sweep(object g_in, double budget, object c_in):
    """Two-step split allocation evaluated on a grid of splitting factors.

    For each c: fraction c of the budget goes to the equal-rate allocation,
    the rest is water-filled on top of it. Returns (allocs, rates, sum_rates,
    fairness) with one row per grid point; fairness is the l1-based measure
    of the normalized rates. Requires all g > 0 and K >= 2.
    """
    cdef double[::1] g = np.ascontiguousarray(g_in, dtype=np.float64)
    cdef double[::1] c_values = np.ascontiguousarray(c_in, dtype=np.float64)
    cdef Py_ssize_t K = g.shape[0]
    cdef Py_ssize_t n = c_values.shape[0]

    allocs_arr = np.empty((n, K))
    rates_arr = np.empty((n, K))
    sum_arr = np.empty(n)
    fair_arr = np.empty(n)
    inv_arr = np.empty(K)
    floors_arr = np.empty(K)
    scratch_arr = np.empty(K)

    cdef double[:, ::1] allocs = allocs_arr
    cdef double[:, ::1] rates = rates_arr
    cdef double[::1] sum_rates = sum_arr
    cdef double[::1] fairness = fair_arr
    cdef double[::1] inv_g = inv_arr
    cdef double[::1] floors = floors_arr
    cdef double[::1] scratch = scratch_arr

    cdef Py_ssize_t i, k
    cdef double s_inv = 0.0, scale, rem, level, p1, p2, total, l1, share, norm

    with nogil:
        for k in range(K):
            inv_g[k] = 1.0 / g[k]
            s_inv += inv_g[k]
        norm = K / (2.0 * (K - 1.0))
        for i in range(n):
            scale = c_values[i] * budget / s_inv
            rem = (1.0 - c_values[i]) * budget
            for k in range(K):
                p1 = scale * inv_g[k]
                allocs[i, k] = p1
                floors[k] = inv_g[k] + p1
            level = _waterfill_level(&floors[0], &scratch[0], K, rem)
            total = 0.0
            for k in range(K):
                p2 = level - floors[k]
                if p2 < 0.0:
                    p2 = 0.0
                allocs[i, k] = allocs[i, k] + p2
                rates[i, k] = log1p(allocs[i, k] * g[k]) / _LN2
                total += rates[i, k]
            sum_rates[i] = total
            l1 = 0.0
            for k in range(K):
                share = rates[i, k] / total - 1.0 / K
                l1 += fabs(share)
            fairness[i] = 1.0 - norm * l1
    return allocs_arr, rates_arr, sum_arr, fair_arr


cdef void _project_budget(double* x, double budget, Py_ssize_t K,
                          double* out, double* work) noexcept nogil:
    """Euclidean projection onto {p >= 0, sum(p) <= budget}."""
    cdef Py_ssize_t k, j, rho = -1
    cdef double s = 0.0, css = 0.0, tau, v
    for k in range(K):
        v = x[k]
        if v < 0.0:
            v = 0.0
        out[k] = v
        s += v
    if s <= budget:
        return
    for k in range(K):
        work[k] = x[k]
    _sort_ascending(work, K)
    tau = 0.0
    for j in range(K):
        # Walk breakpoints from the largest component down.
        css += work[K - 1 - j]
        if work[K - 1 - j] - (css - budget) / (j + 1) > 0.0:
            rho = j
            tau = (css - budget) / (j + 1)
    for k in range(K):
        v = x[k] - tau
        if v < 0.0:
            v = 0.0
        out[k] = v


cdef double _value_grad(int which, double* p, double* g, Py_ssize_t K,
                        double* grad) noexcept nogil:
    """Objective value and gradient; `which` is 0 for pf, 1 for hm."""
    cdef Py_ssize_t k
    cdef double x, r, value = 0.0
    for k in range(K):
        x = p[k] * g[k]
        r = log1p(x)
        if r <= 0.0:
            return -INFINITY
        if which == 0:
            value += log(r)
            grad[k] = g[k] / (r * (1.0 + x))
        else:
            value -= _LN2 / r
            grad[k] = _LN2 * g[k] / (r * r * (1.0 + x))
    return value


cdef double _residual_norm(double* p, double* grad, double budget, Py_ssize_t K,
                           double* tmp, double* out, double* work) noexcept nogil:
    cdef Py_ssize_t k
    cdef double acc = 0.0, d
    for k in range(K):
        tmp[k] = p[k] + grad[k]
    _project_budget(tmp, budget, K, out, work)
    for k in range(K):
        d = out[k] - p[k]
        acc += d * d
    return sqrt(acc)


def _solve_concave(int which, object g_in, double budget, double tol, int max_iter):
    cdef double[::1] g = np.ascontiguousarray(g_in, dtype=np.float64)
    cdef Py_ssize_t K = g.shape[0]

    p_arr = np.empty(K)
    cdef double[::1] p = p_arr
    grad_arr = np.empty(K)
    cand_arr = np.empty(K)
    cand_grad_arr = np.empty(K)
    tmp_arr = np.empty(K)
    proj_arr = np.empty(K)
    work_arr = np.empty(K)
    prev_p_arr = np.empty(K)
    prev_grad_arr = np.empty(K)
    cdef double[::1] grad = grad_arr
    cdef double[::1] cand = cand_arr
    cdef double[::1] cand_grad = cand_grad_arr
    cdef double[::1] tmp = tmp_arr
    cdef double[::1] proj = proj_arr
    cdef double[::1] work = work_arr
    cdef double[::1] prev_p = prev_p_arr
    cdef double[::1] prev_grad = prev_grad_arr

    cdef Py_ssize_t k
    cdef int iterations = 0
    cdef bint moved, accept, have_prev = False
    cdef double s_inv = 0.0, scale, value, cand_value, predicted, noise_floor
    cdef double step = 1.0, residual, moved_any, abs_value, cand_residual
    cdef double curvature, ss

    with nogil:
        # Equal-rate starting point keeps every rate strictly positive.
        for k in range(K):
            work[k] = 1.0 / g[k]
            s_inv += work[k]
        scale = budget / s_inv
        for k in range(K):
            p[k] = scale * work[k]

        value = _value_grad(which, &p[0], &g[0], K, &grad[0])
        residual = _residual_norm(&p[0], &grad[0], budget, K, &tmp[0], &proj[0], &work[0])

        # Armijo backtracking while the objective resolves the predicted gain;
        # once it cannot, accept only residual-shrinking steps to rule out
        # noise-level orbits around the optimum.
        while iterations < max_iter and residual > tol:
            iterations += 1
            # Spectral (Barzilai-Borwein) trial step; fall back to doubling.
            step = step * 2.0
            if step > _STEP_MAX:
                step = _STEP_MAX
            if have_prev:
                curvature = 0.0
                ss = 0.0
                for k in range(K):
                    curvature -= (p[k] - prev_p[k]) * (grad[k] - prev_grad[k])
                    ss += (p[k] - prev_p[k]) * (p[k] - prev_p[k])
                if curvature > 0.0:
                    step = ss / curvature
                    if step < _STEP_MIN:
                        step = _STEP_MIN
                    elif step > _STEP_MAX:
                        step = _STEP_MAX
            for k in range(K):
                prev_p[k] = p[k]
                prev_grad[k] = grad[k]
            have_prev = True
            moved = False
            while step >= _STEP_MIN:
                for k in range(K):
                    tmp[k] = p[k] + step * grad[k]
                _project_budget(&tmp[0], budget, K, &cand[0], &work[0])
                moved_any = 0.0
                predicted = 0.0
                for k in range(K):
                    predicted += grad[k] * (cand[k] - p[k])
                    if cand[k] != p[k]:
                        moved_any = 1.0
                if moved_any == 0.0:
                    break
                cand_value = _value_grad(which, &cand[0], &g[0], K, &cand_grad[0])
                if cand_value > -INFINITY:
                    abs_value = fabs(value)
                    if abs_value < 1.0:
                        abs_value = 1.0
                    noise_floor = 16.0 * _EPS * abs_value
                    if _ARMIJO_SIGMA * predicted >= noise_floor:
                        accept = cand_value >= value + _ARMIJO_SIGMA * predicted
                        cand_residual = -1.0
                    else:
                        cand_residual = _residual_norm(&cand[0], &cand_grad[0], budget, K,
                                                       &tmp[0], &proj[0], &work[0])
                        accept = cand_residual < residual
                    if accept:
                        for k in range(K):
                            p[k] = cand[k]
                            grad[k] = cand_grad[k]
                        value = cand_value
                        if cand_residual < 0.0:
                            cand_residual = _residual_norm(&p[0], &grad[0], budget, K,
                                                           &tmp[0], &proj[0], &work[0])
                        residual = cand_residual
                        moved = True
                        break
                step *= 0.5
            if not moved:
                break

    return p_arr, residual, iterations


def pf_solve(object g_in, double budget, double tol, int max_iter):
    """Proportional fairness: maximize sum_k log(rate_k) over the power budget."""
    return _solve_concave(0, g_in, budget, tol, max_iter)


def hm_solve(object g_in, double budget, double tol, int max_iter):
    """Harmonic-mean rate maximization: minimize sum_k 1/rate_k over the budget."""
    return _solve_concave(1, g_in, budget, tol, max_iter)


def upper_hull_idx(object x_in, object y_in):
    """Indices of the upper concave envelope vertices of points sorted by x.

    `x` must be strictly increasing. Collinear interior points are dropped.
    """
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    if n <= 2:
        return np.arange(n, dtype=np.intp)
    stack_arr = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] stack = stack_arr
    cdef Py_ssize_t i, top = 1
    cdef Py_ssize_t a, b
    cdef double cross
    with nogil:
        stack[0] = 0
        stack[1] = 1
        for i in range(2, n):
            while top >= 1:
                a = stack[top - 1]
                b = stack[top]
                cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
                if cross >= 0.0:
                    top -= 1
                else:
                    break
            top += 1
            stack[top] = i
    return np.asarray(stack_arr[: top + 1]).copy()
