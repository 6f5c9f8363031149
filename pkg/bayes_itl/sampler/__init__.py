"""
Constrained Transition Sampler

Expert constraints on transition rows and the rejection sampler that turns
the data posterior into P(T | D, expert).
"""

from .constraints import (
    AnchorMode,
    BallSource,
    ConstraintContext,
    ball_mismatches,
    ball_property_holds,
    build_context,
    constraint_value,
    constraint_values,
    margin_violations,
    parse_mode,
)
from .rejection import (
    ConstrainedSampler,
    DeltaTable,
    DeltaTuning,
    EqualityMode,
    ItlSampleSet,
    SamplerLimits,
    sample_constrained,
)

__all__ = [
    "AnchorMode",
    "BallSource",
    "ConstraintContext",
    "ball_mismatches",
    "ball_property_holds",
    "build_context",
    "constraint_value",
    "constraint_values",
    "margin_violations",
    "parse_mode",
    "ConstrainedSampler",
    "DeltaTable",
    "DeltaTuning",
    "EqualityMode",
    "ItlSampleSet",
    "SamplerLimits",
    "sample_constrained",
]
