"""Embedding capacity of information flows under a bounded delay in renewal cover traffic."""

from .bgm import (
    ChainTrace,
    MatchOutcome,
    PointSequence,
    bgm_match,
    brute_force_max_matching,
    empirical_capacity,
    generate_renewal,
    simulate_chain,
)
from .capacity import (
    CapacityEstimate,
    InfiniteVarianceError,
    Method,
    SystemMatrix,
    a00_fourier,
    build_system_matrix,
    capacity_linear,
    capacity_monte_carlo,
    capacity_zero_order,
    estimate_capacity,
    fourier_entry,
)
from .ordering import (
    OrderingVerdict,
    convex_order_check,
    lorenz_curve,
    nbue_classify,
    predict_capacity_order,
)
from .renewal_models import (
    Family,
    InterarrivalModel,
    RenewalFunctionTable,
    dispersion_index,
    renewal_function,
    renewal_function_numeric,
)
from .traces import (
    Trace,
    TranchePair,
    capacity_error_table,
    fit_weibull_shape,
    parse_trace,
    scramble,
    select_tranches,
)

__version__ = "0.1.0"
