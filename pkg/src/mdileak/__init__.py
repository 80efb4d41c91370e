"""Finite-key security analysis of decoy-state MDI-QKD with leaky sources."""

from .channel import ObservedStats, YieldTable, expected_counts, fock_yields, sample_counts, yield_table
from .core import (
    PATH_COIN,
    PATH_SERFLING,
    VARIANT_3INT,
    VARIANT_4INT,
    VARIANTS,
    ChannelParams,
    EpsilonBudget,
    ProtocolConfig,
    azuma_bound,
    binary_entropy,
    invocation_count,
    poisson_pmf,
    poisson_upper_tail,
    serfling_upsilon,
    tail_term,
)
from .engine import (
    KeyRateResult,
    evaluate_point,
    eve_worst_case,
    key_length,
    optimize_keyrate,
    scan_distances,
    trace_distances,
)
from .lp import (
    KERNEL_NAME,
    OBJECTIVES_3INT,
    OBJECTIVES_4INT,
    DecoyEstimates,
    LpInfeasibleError,
    LpInstance,
    build_lp_3int,
    build_lp_4int,
    dump_lp,
    estimate_3int,
    estimate_4int,
    solve_lp,
)
from .phase import PhaseErrorEstimate, eph_dispatch, eph_serfling, solve_coin
from .tha import (
    CASES,
    LEAK_MODES,
    MODE_IM_AND_PM,
    MODE_IM_ONLY,
    ThaConfig,
    TraceDistanceSet,
    coherent_overlap,
    coin_imbalance,
    overlap_ZX,
    trace_distance_3int,
    trace_distance_4int,
)

__version__ = "0.1.0"
