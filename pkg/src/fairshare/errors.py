"""Exception types raised by the fairshare library."""


class FairshareError(Exception):
    """Base class for all fairshare errors."""


class DimensionError(FairshareError):
    """Zero-forcing decomposition requested with more users than antennas."""


class InvalidCovariance(FairshareError):
    """Covariance set violates PSD or trace constraints."""


class ZeroSumRate(FairshareError):
    """Rate vector sums to zero; normalized shares are undefined."""


class UndefinedForSingleUser(FairshareError):
    """The l1 fairness measure needs at least two users."""


class InfeasibleFairness(FairshareError):
    """A fairness-bearing objective is degenerate (some user gain is zero)."""


class DegenerateCurve(FairshareError):
    """All tradeoff grid points coincide; no envelope can be formed."""


class InfeasibleTarget(FairshareError):
    """Requested average sum rate is outside the achievable range."""


class ConfigError(FairshareError):
    """Experiment configuration failed validation."""
