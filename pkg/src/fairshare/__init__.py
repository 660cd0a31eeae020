"""Sum-rate/fairness tradeoff toolkit for the zero-forcing MISO downlink.

Layers, bottom up: `channel` (sampling, zero-forcing decomposition, rates),
`fairness` (Jain and l1 measures), `allocators` (the four power-allocation
objectives), `tristage` (split sweep, concave envelope, operating-point
selection, statistical sampler), `benchmark` (seeded ensembles and the
non-causal rate-split bound), `cli` (experiment front end).

Numerical hot kernels run from a compiled extension when available and fall
back to numpy otherwise; see `fairshare.backend_name`.
"""

from fairshare._backend import backend_name
from fairshare.allocators import (
    AllocationResult,
    harmonic_mean,
    max_min,
    max_sum_rate,
    proportional_fair,
)
from fairshare.benchmark import (
    CRITERIA,
    BoundDominanceReport,
    EnsembleResult,
    UpperBoundCurve,
    bound_dominance_report,
    db_to_linear,
    rate_split_bound,
    run_ensemble,
    run_tristage_ensemble,
    upper_bound_curve,
)
from fairshare.channel import (
    ChannelMatrix,
    CovarianceSet,
    PowerAllocation,
    ZfdpcDecomposition,
    dpc_rates,
    sample_channel,
    zfdpc_decompose,
    zfdpc_rates,
)
from fairshare.errors import (
    ConfigError,
    DegenerateCurve,
    DimensionError,
    FairshareError,
    InfeasibleFairness,
    InfeasibleTarget,
    InvalidCovariance,
    UndefinedForSingleUser,
    ZeroSumRate,
)
from fairshare.fairness import jain_cos_identity, jain_index, l1_fairness, normalize
from fairshare.tristage import (
    CakeCutPoint,
    OperatingPoint,
    TradeoffCurve,
    TwoAtomMixer,
    cake_cut,
    mix,
    sample_allocation,
    select,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "BoundDominanceReport",
    "CakeCutPoint",
    "ChannelMatrix",
    "ConfigError",
    "CovarianceSet",
    "CRITERIA",
    "DegenerateCurve",
    "DimensionError",
    "EnsembleResult",
    "FairshareError",
    "InfeasibleFairness",
    "InfeasibleTarget",
    "InvalidCovariance",
    "OperatingPoint",
    "PowerAllocation",
    "TradeoffCurve",
    "TwoAtomMixer",
    "UndefinedForSingleUser",
    "UpperBoundCurve",
    "ZeroSumRate",
    "ZfdpcDecomposition",
    "backend_name",
    "bound_dominance_report",
    "cake_cut",
    "db_to_linear",
    "dpc_rates",
    "harmonic_mean",
    "jain_cos_identity",
    "jain_index",
    "l1_fairness",
    "max_min",
    "max_sum_rate",
    "mix",
    "normalize",
    "proportional_fair",
    "rate_split_bound",
    "run_ensemble",
    "run_tristage_ensemble",
    "sample_allocation",
    "sample_channel",
    "select",
    "sweep",
    "upper_bound_curve",
    "zfdpc_decompose",
    "zfdpc_rates",
]
