"""
Environment Generation

Random ground-truth MDP instances and the reference instance search.
"""

from .generator import (
    EnvDescription,
    EnvSpec,
    describe_env,
    find_env_with_structure,
    generate_env,
    parse_targets,
    reference_env,
    reference_targets,
)

__all__ = [
    "EnvDescription",
    "EnvSpec",
    "describe_env",
    "find_env_with_structure",
    "generate_env",
    "parse_targets",
    "reference_env",
    "reference_targets",
]
