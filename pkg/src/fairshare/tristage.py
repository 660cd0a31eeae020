"""Three-stage power-allocation design and its statistical sampler.

Stage one sweeps a splitting factor c: a fraction c of the budget is spent on
the equal-rate (max-min) allocation, the remainder is water-filled on top,
tracing a curve of (sum rate, fairness) pairs from pure sum-rate maximization
(c = 0) to full equalization (c = 1). Stage two takes the upper concave
envelope of that curve: every envelope point is achievable in time-average by
randomizing over at most two grid allocations. Stage three picks the envelope
point nearest to the proportional-fairness operating pair, falling back to
that pair itself if the envelope cannot match its fairness.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from fairshare._backend import kernels as _k
from fairshare.channel import PowerAllocation, ZfdpcDecomposition
from fairshare.errors import DegenerateCurve, InfeasibleFairness, UndefinedForSingleUser

#: Default number of splitting-factor grid points (uniform, endpoints included).
DEFAULT_GRID = 201

#: Relative slack when deciding whether a queried rate is inside the hull range.
RANGE_TOL = 1e-9

_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CakeCutPoint:
    """One splitting factor with its allocation, rates and (R, F) value."""

    c: float
    alloc: PowerAllocation
    rates: np.ndarray
    sum_rate: float
    fairness: float


@dataclass(frozen=True)
class TwoAtomMixer:
    """Distribution over at most two grid allocations (time-sharing law)."""

    atoms: tuple
    weights: tuple
    c_values: tuple

    @property
    def degenerate(self) -> bool:
        return self.atoms[0] == self.atoms[1] or self.weights[1] == 0.0


@dataclass(frozen=True)
class TradeoffCurve:
    """Sweep grid plus (after `mix`) its upper concave envelope.

    Grid arrays are indexed by splitting factor; `hull_idx` holds grid indices
    of envelope vertices in increasing sum-rate order, or None for a raw sweep.
    """

    c: np.ndarray
    allocs: np.ndarray
    rates: np.ndarray
    sum_rates: np.ndarray
    fairness: np.ndarray
    budget: float
    hull_idx: np.ndarray | None = None

    @property
    def grid_size(self) -> int:
        return self.c.shape[0]

    @property
    def n_users(self) -> int:
        return self.allocs.shape[1]

    @property
    def has_hull(self) -> bool:
        return self.hull_idx is not None

    def point(self, i: int) -> CakeCutPoint:
        return CakeCutPoint(
            c=float(self.c[i]),
            alloc=PowerAllocation(powers=self.allocs[i], budget=self.budget),
            rates=self.rates[i],
            sum_rate=float(self.sum_rates[i]),
            fairness=float(self.fairness[i]),
        )

    def _require_hull(self) -> np.ndarray:
        if self.hull_idx is None:
            raise ValueError("curve has no envelope yet; call mix() first")
        return self.hull_idx

    @property
    def hull_sum_rates(self) -> np.ndarray:
        return self.sum_rates[self._require_hull()]

    @property
    def hull_fairness(self) -> np.ndarray:
        return self.fairness[self._require_hull()]

    @property
    def mixers(self) -> tuple:
        """Per envelope segment, the pair of grid indices it mixes between."""
        idx = self._require_hull()
        return tuple((int(idx[j]), int(idx[j + 1])) for j in range(idx.shape[0] - 1))

    def f_max(self, sum_rate: float) -> float:
        """Best time-average fairness achievable at the given sum rate."""
        hull_r = self.hull_sum_rates
        sum_rate = self._clip_to_range(sum_rate, hull_r)
        return float(np.interp(sum_rate, hull_r, self.hull_fairness))

    def mixer_at(self, sum_rate: float) -> TwoAtomMixer:
        """Two-atom distribution over grid points realizing the hull at `sum_rate`."""
        idx = self._require_hull()
        hull_r = self.sum_rates[idx]
        sum_rate = self._clip_to_range(sum_rate, hull_r)
        j = int(np.searchsorted(hull_r, sum_rate, side="right")) - 1
        j = min(max(j, 0), idx.shape[0] - 2) if idx.shape[0] > 1 else 0
        a, b = int(idx[j]), int(idx[min(j + 1, idx.shape[0] - 1)])
        span = float(self.sum_rates[b] - self.sum_rates[a])
        if a == b or span == 0.0:
            return TwoAtomMixer((a, a), (1.0, 0.0), (float(self.c[a]), float(self.c[a])))
        w = (float(self.sum_rates[b]) - sum_rate) / span
        w = min(max(w, 0.0), 1.0)
        if w == 1.0:
            return TwoAtomMixer((a, a), (1.0, 0.0), (float(self.c[a]), float(self.c[a])))
        if w == 0.0:
            return TwoAtomMixer((b, b), (1.0, 0.0), (float(self.c[b]), float(self.c[b])))
        return TwoAtomMixer((a, b), (w, 1.0 - w), (float(self.c[a]), float(self.c[b])))

    def _clip_to_range(self, sum_rate: float, hull_r: np.ndarray) -> float:
        slack = RANGE_TOL * max(1.0, abs(float(hull_r[-1])))
        if sum_rate < hull_r[0] - slack or sum_rate > hull_r[-1] + slack:
            raise ValueError(
                f"sum rate {sum_rate:.12g} outside achievable range "
                f"[{hull_r[0]:.12g}, {hull_r[-1]:.12g}]"
            )
        return min(max(sum_rate, float(hull_r[0])), float(hull_r[-1]))

    def validate(self, tol: float = 1e-9) -> None:
        """Re-check structural invariants (budget feasibility, hull shape)."""
        slack = tol * max(self.budget, 1.0)
        if np.any(self.allocs < -slack):
            raise ValueError("negative power in grid allocation")
        if np.any(self.allocs.sum(axis=1) > self.budget + slack):
            raise ValueError("grid allocation exceeds the budget")
        if self.hull_idx is not None:
            r = self.hull_sum_rates
            f = self.hull_fairness
            if np.any(np.diff(r) <= 0.0):
                raise ValueError("hull sum rates are not strictly increasing")
            if r.shape[0] >= 3:
                slopes = np.diff(f) / np.diff(r)
                if np.any(np.diff(slopes) > tol):
                    raise ValueError("hull is not concave")
            covered = np.interp(self.sum_rates, r, f)
            if np.any(covered < self.fairness - 1e-12):
                raise ValueError("hull fails to dominate the raw curve")

    def to_json(self) -> dict:
        data = {
            "schema_version": _SCHEMA_VERSION,
            "budget": self.budget,
            "c": self.c.tolist(),
            "alloc": self.allocs.tolist(),
            "rates": self.rates.tolist(),
            "sum_rate": self.sum_rates.tolist(),
            "fairness": self.fairness.tolist(),
            "hull": None,
            "mixers": None,
        }
        if self.hull_idx is not None:
            data["hull"] = {
                "grid_index": [int(i) for i in self.hull_idx],
                "sum_rate": self.hull_sum_rates.tolist(),
                "fairness": self.hull_fairness.tolist(),
            }
            data["mixers"] = [list(pair) for pair in self.mixers]
        return data

    @classmethod
    def from_json(cls, data: dict) -> "TradeoffCurve":
        if data.get("schema_version") != _SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {data.get('schema_version')!r}")
        hull = data.get("hull")
        return cls(
            c=np.asarray(data["c"], dtype=np.float64),
            allocs=np.asarray(data["alloc"], dtype=np.float64),
            rates=np.asarray(data["rates"], dtype=np.float64),
            sum_rates=np.asarray(data["sum_rate"], dtype=np.float64),
            fairness=np.asarray(data["fairness"], dtype=np.float64),
            budget=float(data["budget"]),
            hull_idx=None if hull is None else np.asarray(hull["grid_index"], dtype=np.intp),
        )

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    def write_csv(self, path) -> None:
        """Plot-ready (sum rate, fairness) columns for the raw sweep grid."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["sum_rate", "fairness"])
            for r, f in zip(self.sum_rates, self.fairness):
                writer.writerow([repr(float(r)), repr(float(f))])


@dataclass(frozen=True)
class OperatingPoint:
    """Selected (sum rate, fairness) pair with its time-sharing law."""

    sum_rate: float
    fairness: float
    mixer: TwoAtomMixer | None
    fallback_used: bool


def _check_gains(dec: ZfdpcDecomposition) -> np.ndarray:
    g = dec.effective_gains
    if g.shape[0] < 2:
        raise UndefinedForSingleUser("the split sweep needs at least two users")
    if np.any(g == 0.0):
        raise InfeasibleFairness("zero effective gain: equal-rate stage is infeasible")
    return g


def cake_cut(dec: ZfdpcDecomposition, budget: float, c: float) -> CakeCutPoint:
    """Evaluate one splitting factor: equal-rate share c, water-filled remainder."""
    if not 0.0 <= c <= 1.0:
        raise ValueError("splitting factor must lie in [0, 1]")
    if budget <= 0.0:
        raise ValueError("budget must be positive")
    g = _check_gains(dec)
    allocs, rates, sum_rates, fairness = _k.cake_sweep(g, float(budget), np.array([c]))
    return CakeCutPoint(
        c=float(c),
        alloc=PowerAllocation(powers=allocs[0], budget=float(budget)),
        rates=rates[0],
        sum_rate=float(sum_rates[0]),
        fairness=float(fairness[0]),
    )


def sweep(dec: ZfdpcDecomposition, budget: float, grid_size: int = DEFAULT_GRID) -> TradeoffCurve:
    """Evaluate the split on a uniform c-grid over [0, 1], endpoints included."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if budget <= 0.0:
        raise ValueError("budget must be positive")
    g = _check_gains(dec)
    c_values = np.linspace(0.0, 1.0, grid_size)
    allocs, rates, sum_rates, fairness = _k.cake_sweep(g, float(budget), c_values)
    return TradeoffCurve(
        c=c_values,
        allocs=allocs,
        rates=rates,
        sum_rates=sum_rates,
        fairness=fairness,
        budget=float(budget),
    )


def mix(curve: TradeoffCurve) -> TradeoffCurve:
    """Attach the upper concave envelope of the (sum rate, fairness) grid.

    Every envelope point is a mixture of at most two grid points, so the
    envelope is exactly achievable by randomized time-sharing. Raises
    DegenerateCurve when the grid spans no sum-rate interval at all.
    """
    if curve.grid_size < 2:
        raise ValueError("need at least 2 grid points to build an envelope")
    order = np.lexsort((curve.fairness, curve.sum_rates))
    r_sorted = curve.sum_rates[order]
    # Collapse duplicate sum rates onto their best fairness (last in the sort).
    keep = np.append(r_sorted[1:] != r_sorted[:-1], True)
    candidates = order[keep]
    if candidates.shape[0] < 2:
        raise DegenerateCurve("all grid points coincide; the envelope is a single point")
    local = _k.upper_hull_idx(curve.sum_rates[candidates], curve.fairness[candidates])
    return replace(curve, hull_idx=candidates[np.asarray(local)])


def _envelope_slack(curve: TradeoffCurve) -> float:
    """Upper bound on how far the gridded envelope can sit below the true one.

    For a concave stretch of the underlying curve, linear interpolation
    between grid points undershoots by at most the largest local chord
    deficit. Two-user pf pairs lie exactly on the continuum curve, so without
    this allowance the fallback branch would trigger on grid noise alone.
    """
    order = np.argsort(curve.sum_rates, kind="stable")
    r = curve.sum_rates[order]
    f = curve.fairness[order]
    if r.shape[0] < 3:
        return 1e-9
    span = r[2:] - r[:-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(span > 0.0, (r[1:-1] - r[:-2]) / span, 0.0)
    chord = f[:-2] + (f[2:] - f[:-2]) * t
    deficit = np.where(span > 0.0, chord - f[1:-1], 0.0)
    return max(float(deficit.max(initial=0.0)), 1e-9)


def select(curve: TradeoffCurve, pf_point, *, normalize_rate: bool = False) -> OperatingPoint:
    """Pick the envelope point nearest to the proportional-fairness pair.

    Distance is the raw squared Euclidean one on (sum rate, fairness) pairs;
    `normalize_rate=True` divides the rate axis by the maximum hull rate
    first. If the envelope cannot reach the fairness of the pf pair at its
    own sum rate (or that rate is outside the hull range), the pf pair itself
    is returned with `fallback_used` set; that test allows for the envelope's
    own discretization error, since the generic two-user case has the pf pair
    exactly on the continuum envelope. Distance ties prefer the fairer point.
    """
    idx = curve._require_hull()
    r_pf, f_pf = float(pf_point[0]), float(pf_point[1])
    hull_r = curve.sum_rates[idx]
    hull_f = curve.fairness[idx]
    slack = RANGE_TOL * max(1.0, abs(float(hull_r[-1])))
    if r_pf < hull_r[0] - slack or r_pf > hull_r[-1] + slack:
        return OperatingPoint(r_pf, f_pf, None, True)
    if f_pf > curve.f_max(r_pf) + _envelope_slack(curve):
        return OperatingPoint(r_pf, f_pf, None, True)

    scale = 1.0 / float(hull_r[-1]) if normalize_rate else 1.0
    xs = hull_r * scale
    ys = hull_f
    px, py = r_pf * scale, f_pf

    # Candidates: every vertex plus the orthogonal foot on every segment.
    best = None
    for j in range(xs.shape[0]):
        d2 = (xs[j] - px) ** 2 + (ys[j] - py) ** 2
        cand = (d2, -float(hull_f[j]), float(hull_r[j]))
        if best is None or cand < best:
            best = cand
    for j in range(xs.shape[0] - 1):
        dx, dy = xs[j + 1] - xs[j], ys[j + 1] - ys[j]
        seg_sq = dx * dx + dy * dy
        if seg_sq == 0.0:
            continue
        t = ((px - xs[j]) * dx + (py - ys[j]) * dy) / seg_sq
        if not 0.0 < t < 1.0:
            continue
        fx, fy = xs[j] + t * dx, ys[j] + t * dy
        d2 = (fx - px) ** 2 + (fy - py) ** 2
        r_cand = float(hull_r[j] + t * (hull_r[j + 1] - hull_r[j]))
        cand = (d2, -float(fy), r_cand)
        if best is None or cand < best:
            best = cand

    r_star = best[2]
    f_star = curve.f_max(r_star)
    return OperatingPoint(r_star, f_star, curve.mixer_at(r_star), False)


def sample_allocation(op: OperatingPoint, curve: TradeoffCurve, dec: ZfdpcDecomposition,
                      budget: float, n: int, seed) -> list:
    """Draw n i.i.d. allocations from the operating point's time-sharing law.

    Per-draw (sum rate, fairness) averages converge to the operating pair at
    the usual 1/sqrt(n) Monte-Carlo rate. Deterministic given the seed.
    """
    if op.fallback_used or op.mixer is None:
        raise ValueError("operating point fell back to the fixed pf allocation; "
                         "there is no distribution to sample")
    if n < 1:
        raise ValueError("n must be positive")
    if dec.n_users != curve.n_users:
        raise ValueError("decomposition and curve disagree on the user count")
    if abs(budget - curve.budget) > RANGE_TOL * max(1.0, budget):
        raise ValueError("budget does not match the curve's budget")
    rng = np.random.default_rng(seed)
    picks = rng.choice(2, size=n, p=list(op.mixer.weights))
    atoms = op.mixer.atoms
    return [
        PowerAllocation(powers=curve.allocs[atoms[pick]], budget=curve.budget)
        for pick in picks
    ]
