"""
MDP Core

Tabular MDP types, exact planning and epsilon-ball predicates.
"""

from .mdp import (
    EpsilonBallMap,
    Policy,
    QTable,
    TabularMdp,
    ValueTable,
    document_hash,
    load_mdp,
    save_mdp,
)
from .planning import (
    PlanningOptions,
    StateKind,
    build_expert_policy,
    classify_states,
    epsilon_ball,
    evaluate_policy_closed_form,
    evaluate_policy_iterative,
    expert_policy_for,
    finite_horizon_values,
    q_expert,
    q_from_v,
    value_iteration,
)

__all__ = [
    "EpsilonBallMap",
    "Policy",
    "QTable",
    "TabularMdp",
    "ValueTable",
    "document_hash",
    "load_mdp",
    "save_mdp",
    "PlanningOptions",
    "StateKind",
    "build_expert_policy",
    "classify_states",
    "epsilon_ball",
    "evaluate_policy_closed_form",
    "evaluate_policy_iterative",
    "expert_policy_for",
    "finite_horizon_values",
    "q_expert",
    "q_from_v",
    "value_iteration",
]
