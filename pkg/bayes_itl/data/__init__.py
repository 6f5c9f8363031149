"""
Offline Data

Expert rollouts, transition counts and batch file storage.
"""

from .dataset_manager import DatasetManager, batch_from_document, batch_to_document, load_batch
from .rollout import (
    DEFAULT_HORIZON,
    Step,
    Trajectory,
    TrajectoryBatch,
    counts_from_trajectories,
    derive_dataset_seed,
    merge_batches,
    rollout_batch,
    rollout_datasets,
)

__all__ = [
    "DatasetManager",
    "batch_from_document",
    "batch_to_document",
    "load_batch",
    "DEFAULT_HORIZON",
    "Step",
    "Trajectory",
    "TrajectoryBatch",
    "counts_from_trajectories",
    "derive_dataset_seed",
    "merge_batches",
    "rollout_batch",
    "rollout_datasets",
]
