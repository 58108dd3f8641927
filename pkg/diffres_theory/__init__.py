from .dynamics import DecayFit, RatioTrace, StabilityReport, fit_log_decay, ratio_trace, verify_stability
from .errors import TheoryError
from .flow import FlowPiece, FlowSchedule, apply_flow, beta_for, construct_separating_flow, flow_summary
from .separability import SeparabilityResult, linear_separability
from .structured import (
    DEFAULT_DIRECTIONS,
    StructuredDataset,
    check_parallel_separable,
    critical_directions_2d,
    structured_stats,
    theorem2_threshold,
)

__all__ = [
    "DEFAULT_DIRECTIONS",
    "DecayFit",
    "FlowPiece",
    "FlowSchedule",
    "RatioTrace",
    "SeparabilityResult",
    "StabilityReport",
    "StructuredDataset",
    "TheoryError",
    "apply_flow",
    "beta_for",
    "check_parallel_separable",
    "construct_separating_flow",
    "critical_directions_2d",
    "fit_log_decay",
    "flow_summary",
    "linear_separability",
    "ratio_trace",
    "structured_stats",
    "theorem2_threshold",
    "verify_stability",
]
