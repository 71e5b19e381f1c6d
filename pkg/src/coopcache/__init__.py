"""Coded caching for broadcast networks with user cooperation.

Exact (rational-arithmetic) implementations of the centralized and
decentralized cooperative coded-caching schemes: placement, delivery
scheduling with parallel user groups, closed-form delay/gain expressions,
converse lower bounds with gap verification, and a bit-level simulator with
a scheduler-independent decode check.
"""

from .model import (
    Frac,
    SystemConfig,
    SchedulingError,
    GroupPartition,
    FragmentId,
    Constituent,
    XorSymbol,
    DeliverySchedule,
    as_frac,
    enumerate_subsets,
    enumerate_equal_partitions,
    enumerate_remainder_partitions,
    equal_partition_count,
    remainder_partition_count,
    group_multiplicity,
    remainder_group_multiplicity,
    f_ks,
    validate_demands,
)

from .centralized import (
    CentralPlacement,
    CentralizedRates,
    SplitPlan,
    build_central_placement,
    build_delivery,
    build_server_schedule,
    build_user_schedule,
    centralized_delay,
    centralized_rates,
    choose_alpha,
    coding_gain_m,
    make_split_plan,
    piecewise_alpha,
)
from .decentralized import (
    AllocationPlan,
    DecentralPlacement,
    DecentralizedRates,
    GainReport,
    RateComponents,
    allocation_plan,
    build_decentral_delivery,
    build_decentral_placement,
    corollary_bounds,
    decentralized_delay,
    decentralized_gains,
    decentralized_rates,
    inner_group_coding,
    lambda2_split,
    parallel_user_delivery,
    rate_components,
    select_case,
    server_delivery_decentralized,
)
from .bounds import (
    Baselines,
    BoundReport,
    CentralizedGapReport,
    DecentralizedGapReport,
    GapPoint,
    baselines,
    centralized_gains,
    centralized_gap_grid,
    decentralized_gap_bound,
    decentralized_gap_grid,
    gap_regime,
    load_grid_spec,
    lower_bound,
    p_at_least_threshold,
    p_star,
    p_threshold,
    piecewise_gains,
    verify_gap_centralized,
    verify_gap_decentralized,
)
from .simulator import (
    BitLibrary,
    CentralFragmentResolver,
    DecentralFragmentResolver,
    LogEntry,
    RateReport,
    SimulationResult,
    TransmissionLog,
    brute_force_decode_check,
    execute_schedule,
    required_central_F,
    run_centralized,
    run_decentralized,
)

__all__ = [
    "Frac",
    "SystemConfig",
    "SchedulingError",
    "GroupPartition",
    "FragmentId",
    "Constituent",
    "XorSymbol",
    "DeliverySchedule",
    "as_frac",
    "enumerate_subsets",
    "enumerate_equal_partitions",
    "enumerate_remainder_partitions",
    "equal_partition_count",
    "remainder_partition_count",
    "group_multiplicity",
    "remainder_group_multiplicity",
    "f_ks",
    "validate_demands",
    "CentralPlacement",
    "CentralizedRates",
    "SplitPlan",
    "build_central_placement",
    "build_delivery",
    "build_server_schedule",
    "build_user_schedule",
    "centralized_delay",
    "centralized_rates",
    "choose_alpha",
    "coding_gain_m",
    "make_split_plan",
    "piecewise_alpha",
    "AllocationPlan",
    "DecentralPlacement",
    "DecentralizedRates",
    "GainReport",
    "RateComponents",
    "allocation_plan",
    "build_decentral_delivery",
    "build_decentral_placement",
    "corollary_bounds",
    "decentralized_delay",
    "decentralized_gains",
    "decentralized_rates",
    "inner_group_coding",
    "lambda2_split",
    "parallel_user_delivery",
    "rate_components",
    "select_case",
    "server_delivery_decentralized",
    "Baselines",
    "BoundReport",
    "CentralizedGapReport",
    "DecentralizedGapReport",
    "GapPoint",
    "baselines",
    "centralized_gains",
    "centralized_gap_grid",
    "decentralized_gap_bound",
    "decentralized_gap_grid",
    "gap_regime",
    "load_grid_spec",
    "lower_bound",
    "p_at_least_threshold",
    "p_star",
    "p_threshold",
    "piecewise_gains",
    "verify_gap_centralized",
    "verify_gap_decentralized",
    "BitLibrary",
    "CentralFragmentResolver",
    "DecentralFragmentResolver",
    "LogEntry",
    "RateReport",
    "SimulationResult",
    "TransmissionLog",
    "brute_force_decode_check",
    "execute_schedule",
    "required_central_F",
    "run_centralized",
    "run_decentralized",
]

__version__ = "0.1.0"
