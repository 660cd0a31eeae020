"""Complex channel model, zero-forcing decomposition and rate evaluation.

A K-user downlink with an N-antenna transmitter is described by a K x N
complex matrix whose rows are the per-user channel vectors. QR-decomposing
the conjugate transpose yields orthonormal beamformers and a lower-triangular
gain matrix; with successive interference pre-cancellation each user sees an
interference-free scalar channel with power gain |l_kk|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fairshare.errors import DimensionError, InvalidCovariance

#: |l_kk|^2 below RANK_TOL * ||H||_F^2 / K marks the decomposition rank-deficient.
RANK_TOL = 1e-8

#: Slack allowed on the total power constraint, relative to max(budget, 1).
BUDGET_TOL = 1e-9

#: PSD / trace slack for covariance validation, relative to matrix scale.
COV_TOL = 1e-9


@dataclass(frozen=True)
class ChannelMatrix:
    """A K x N complex channel realization; rows are per-user channel vectors."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.complex128)
        if entries.ndim != 2 or entries.shape[0] < 1 or entries.shape[1] < 1:
            raise ValueError("channel matrix must be 2-D with K >= 1, N >= 1")
        if not np.all(np.isfinite(entries.real)) or not np.all(np.isfinite(entries.imag)):
            raise ValueError("channel matrix entries must be finite")
        object.__setattr__(self, "entries", entries)

    @property
    def n_users(self) -> int:
        return self.entries.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.entries.shape[1]

    def to_json(self) -> dict:
        """Plain-JSON form: {K, N, re, im} with row-major nested lists."""
        return {
            "K": self.n_users,
            "N": self.n_antennas,
            "re": self.entries.real.tolist(),
            "im": self.entries.imag.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ChannelMatrix":
        re = np.asarray(data["re"], dtype=np.float64)
        im = np.asarray(data["im"], dtype=np.float64)
        if re.shape != im.shape:
            raise ValueError("re and im parts must have identical shapes")
        mat = cls(re + 1j * im)
        if mat.n_users != data["K"] or mat.n_antennas != data["N"]:
            raise ValueError("declared K/N do not match the matrix shape")
        return mat


@dataclass(frozen=True)
class ZfdpcDecomposition:
    """Orthonormal beamformers and triangular gains for a user ordering.

    `beamformers` is N x K with unit-norm columns, `gains_matrix` is the K x K
    lower-triangular L with H'(ordering)^H = Q L^H, and `effective_gains` holds
    |l_kk|^2 per user in encoding order. Diagonal phases are normalized so each
    l_kk is real and nonnegative.
    """

    beamformers: np.ndarray
    gains_matrix: np.ndarray
    ordering: tuple
    effective_gains: np.ndarray = field(repr=False)
    rank_deficient: bool = False

    @property
    def n_users(self) -> int:
        return self.gains_matrix.shape[0]


@dataclass(frozen=True)
class PowerAllocation:
    """Nonnegative per-user powers under a total budget (linear units)."""

    powers: np.ndarray
    budget: float

    def __post_init__(self):
        powers = np.asarray(self.powers, dtype=np.float64)
        if powers.ndim != 1:
            raise ValueError("powers must be a 1-D vector")
        if self.budget < 0.0 or not np.isfinite(self.budget):
            raise ValueError("budget must be finite and nonnegative")
        if np.any(powers < 0.0):
            raise ValueError("powers must be nonnegative")
        slack = BUDGET_TOL * max(self.budget, 1.0)
        if powers.sum() > self.budget + slack:
            raise ValueError(
                f"total power {powers.sum():.12g} exceeds budget {self.budget:.12g}"
            )
        object.__setattr__(self, "powers", powers)

    @property
    def n_users(self) -> int:
        return self.powers.shape[0]


@dataclass(frozen=True)
class CovarianceSet:
    """Per-user N x N transmit covariances with per-user trace limits."""

    matrices: np.ndarray
    power_limits: np.ndarray

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=np.complex128)
        limits = np.asarray(self.power_limits, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("matrices must have shape (K, N, N)")
        if limits.shape != (mats.shape[0],):
            raise ValueError("power_limits must have one entry per user")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "power_limits", limits)

    def validate(self) -> None:
        """Raise InvalidCovariance unless every matrix is PSD with tr <= limit."""
        for k, (mat, limit) in enumerate(zip(self.matrices, self.power_limits)):
            scale = max(float(np.abs(mat).max(initial=0.0)), 1.0)
            if np.abs(mat - mat.conj().T).max(initial=0.0) > COV_TOL * scale:
                raise InvalidCovariance(f"covariance {k} is not Hermitian")
            eig_min = float(np.linalg.eigvalsh(mat).min())
            if eig_min < -COV_TOL * scale:
                raise InvalidCovariance(f"covariance {k} has eigenvalue {eig_min:.3g} < 0")
            trace = float(mat.trace().real)
            if trace > limit + COV_TOL * max(limit, 1.0):
                raise InvalidCovariance(
                    f"covariance {k} trace {trace:.12g} exceeds power limit {limit:.12g}"
                )


def sample_channel(K: int, N: int, seed) -> ChannelMatrix:
    """Draw a K x N channel with i.i.d. CN(0, 1) entries.

    `seed` is anything `numpy.random.default_rng` accepts; the draw is
    deterministic given the seed. Real and imaginary parts each have variance
    1/2 so E|h|^2 = 1 per entry.
    """
    if K < 1 or N < 1:
        raise ValueError("K and N must both be at least 1")
    rng = np.random.default_rng(seed)
    re = rng.standard_normal((K, N))
    im = rng.standard_normal((K, N))
    return ChannelMatrix((re + 1j * im) / np.sqrt(2.0))


def zfdpc_decompose(H: ChannelMatrix, ordering=None) -> ZfdpcDecomposition:
    """Zero-forcing decomposition of a (possibly re-ordered) channel.

    Rows of H are permuted by `ordering` (0-based; identity when omitted),
    then the conjugate transpose is QR-factored with Householder reflections.
    Column phases are normalized so the triangular diagonal is real and
    nonnegative. Raises DimensionError when K > N; a near-zero |l_kk|^2 only
    sets the `rank_deficient` flag (that user's rate is 0 at any power).
    """
    K, N = H.n_users, H.n_antennas
    if K > N:
        raise DimensionError(f"zero-forcing needs K <= N, got K={K}, N={N}")
    if ordering is None:
        ordering = tuple(range(K))
    else:
        ordering = tuple(int(i) for i in ordering)
        if sorted(ordering) != list(range(K)):
            raise ValueError(f"ordering must be a permutation of 0..{K - 1}")

    permuted = H.entries[list(ordering), :]
    q, r = np.linalg.qr(permuted.conj().T, mode="reduced")

    diag = np.diagonal(r).copy()
    phases = np.ones(K, dtype=np.complex128)
    nonzero = np.abs(diag) > 0.0
    phases[nonzero] = diag[nonzero] / np.abs(diag[nonzero])
    q = q * phases[None, :]
    r = phases.conj()[:, None] * r

    gains_matrix = r.conj().T
    effective_gains = np.abs(np.diagonal(gains_matrix)) ** 2
    frob_sq = float(np.linalg.norm(H.entries) ** 2)
    rank_deficient = bool(np.any(effective_gains < RANK_TOL * frob_sq / K))
    return ZfdpcDecomposition(
        beamformers=q,
        gains_matrix=gains_matrix,
        ordering=ordering,
        effective_gains=effective_gains,
        rank_deficient=rank_deficient,
    )


def zfdpc_rates(dec: ZfdpcDecomposition, alloc) -> np.ndarray:
    """Per-user rates log2(1 + p_k |l_kk|^2) in bits per channel use.

    `alloc` is a PowerAllocation or a bare power vector, indexed in the
    decomposition's encoding order.
    """
    powers = alloc.powers if isinstance(alloc, PowerAllocation) else np.asarray(alloc, dtype=np.float64)
    if powers.shape[0] != dec.n_users:
        raise ValueError("allocation length does not match user count")
    return np.log1p(powers * dec.effective_gains) / np.log(2.0)


def dpc_rates(H: ChannelMatrix, covs: CovarianceSet) -> np.ndarray:
    """Per-user rates of successive pre-cancellation with given covariances.

    User k sees interference only from users encoded after it:
    R_k = log2(1 + S_k / (1 + I_k)) with S_k the own-signal quadratic form and
    I_k the one of the trailing covariance sum. The received signal is
    h_k^T x, so quadratic forms act on conj(h_k).
    """
    covs.validate()
    K = H.n_users
    if covs.matrices.shape[0] != K or covs.matrices.shape[1] != H.n_antennas:
        raise ValueError("covariance dimensions do not match the channel")
    rates = np.empty(K)
    trailing = np.zeros_like(covs.matrices[0])
    signal = np.empty(K)
    interference = np.empty(K)
    for k in range(K - 1, -1, -1):
        a = H.entries[k].conj()
        signal[k] = float(np.real(a.conj() @ covs.matrices[k] @ a))
        interference[k] = float(np.real(a.conj() @ trailing @ a))
        trailing = trailing + covs.matrices[k]
    for k in range(K):
        rates[k] = np.log1p(max(signal[k], 0.0) / (1.0 + max(interference[k], 0.0))) / np.log(2.0)
    return rates
