#!/usr/bin/env python3
"""
Exceptions

Error types raised across the toolkit. Every error carries the values a caller
needs to diagnose it (residuals, offending indices, last tuned bounds).
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple


class ItlError(Exception):
    """Base class for all toolkit errors"""


class ContractViolation(ItlError, ValueError):
    """Shape, probability or index contract broken by an input"""


class ConfigError(ItlError):
    """Invalid or unreadable configuration"""


class PlanningConvergenceError(ItlError):
    """Value iteration did not reach the requested tolerance"""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"value iteration did not converge after {iterations} sweeps "
            f"(last residual {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations


class StructureSearchError(ItlError):
    """No environment matched the requested stochastic-state structure"""

    def __init__(self,
                 targets: Dict[float, int],
                 closest_seed: Optional[int],
                 closest_counts: Dict[float, int],
                 tries: int):
        super().__init__(
            f"no environment matched {targets} within {tries} seeds; "
            f"closest was seed {closest_seed} with counts {closest_counts}"
        )
        self.targets = targets
        self.closest_seed = closest_seed
        self.closest_counts = closest_counts
        self.tries = tries


class RowDrawLimitError(ItlError):
    """A single transition row could not satisfy its constraint"""

    def __init__(self, state: int, action: int, bound: Tuple[float, float], draws: int):
        low, high = bound
        super().__init__(
            f"row ({state}, {action}) found no draw with constraint in "
            f"[{low:.6g}, {high:.6g}] after {draws} draws"
        )
        self.state = state
        self.action = action
        self.bound = bound
        self.draws = draws


class OuterRoundLimitError(ItlError):
    """Candidate dynamics kept failing the whole-matrix acceptance check"""

    def __init__(self, deltas: Any, failure_states: Sequence[int], rounds: int):
        super().__init__(
            f"no candidate accepted after {rounds} consecutive rounds; "
            f"failing states {sorted(failure_states)}"
        )
        self.deltas = deltas
        self.failure_states: List[int] = sorted(failure_states)
        self.rounds = rounds


class ExperimentFailedError(ItlError):
    """Too many datasets were flagged during an experiment run"""

    def __init__(self, report: Any, flagged: int, total: int):
        super().__init__(f"{flagged} of {total} dataset runs were flagged")
        self.report = report
        self.flagged = flagged
        self.total = total
