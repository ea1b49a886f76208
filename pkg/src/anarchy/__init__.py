"""Equilibria, coordination mechanisms and efficiency bounds for parallel links."""
from .analysis import (
    BoundReport,
    ContinuityCheck,
    CurveSample,
    Mechanism,
    benign_bound,
    continuity_no_improvement_check,
    curve_breakpoints,
    greedy_parameters,
    lower_bound_value,
    ratio_curve,
    ratio_sup,
    recurrence_bound,
    tail_ratio,
    two_link_simple_bound,
)
from .config import DEFAULT_TOLERANCE, comparison_tolerance
from .equilibrium import (
    EquilibriumCheck,
    EquilibriumResult,
    cost_increment,
    is_user_equilibrium,
    nash_flow,
    opt_flow,
    profile_cost,
    water_fill,
    worst_equilibrium_cost_two_links,
)
from .errors import (
    AnarchyError,
    BadParamCount,
    EmptyNetwork,
    InfeasibleRate,
    NegativeCoefficient,
    NegativeRate,
    NotContinuousAtEquilibrium,
    NotTwoLinks,
    ParamOutOfRange,
    ParamTooSmall,
    RatioOutOfRange,
    RatioTooSmall,
    SchemaError,
    SegmentMismatch,
    TooManyLinks,
    ZeroSlopeNotLast,
)
from .mechanisms import (
    FreezeStage,
    LinkUsageCheck,
    PlateauParams,
    ThresholdParams,
    build_plateau_mechanism,
    build_threshold_mechanism,
    mechanism_from_dict,
    mechanism_to_dict,
    mn_flow,
    mn_uses_links_no_earlier_than_opt,
    solve_plateau_params,
)
from .model import (
    AffineLatency,
    FlowProfile,
    ParallelNetwork,
    PiecewiseLatency,
    network_from_dict,
    normalize_network,
)

__all__ = [
    "AffineLatency",
    "AnarchyError",
    "BadParamCount",
    "BoundReport",
    "ContinuityCheck",
    "CurveSample",
    "DEFAULT_TOLERANCE",
    "EmptyNetwork",
    "EquilibriumCheck",
    "EquilibriumResult",
    "FlowProfile",
    "FreezeStage",
    "InfeasibleRate",
    "LinkUsageCheck",
    "Mechanism",
    "NegativeCoefficient",
    "NegativeRate",
    "NotContinuousAtEquilibrium",
    "NotTwoLinks",
    "ParallelNetwork",
    "ParamOutOfRange",
    "ParamTooSmall",
    "PiecewiseLatency",
    "PlateauParams",
    "RatioOutOfRange",
    "RatioTooSmall",
    "SchemaError",
    "SegmentMismatch",
    "ThresholdParams",
    "TooManyLinks",
    "ZeroSlopeNotLast",
    "benign_bound",
    "build_plateau_mechanism",
    "build_threshold_mechanism",
    "comparison_tolerance",
    "continuity_no_improvement_check",
    "cost_increment",
    "curve_breakpoints",
    "greedy_parameters",
    "is_user_equilibrium",
    "lower_bound_value",
    "mechanism_from_dict",
    "mechanism_to_dict",
    "mn_flow",
    "mn_uses_links_no_earlier_than_opt",
    "nash_flow",
    "network_from_dict",
    "normalize_network",
    "opt_flow",
    "profile_cost",
    "ratio_curve",
    "ratio_sup",
    "recurrence_bound",
    "solve_plateau_params",
    "tail_ratio",
    "two_link_simple_bound",
    "water_fill",
    "worst_equilibrium_cost_two_links",
]
