#!/usr/bin/env python3
"""
Dataset Manager

Stores offline batches as one JSON document each (`batch_0000.json`, ...).
A document carries the batch metadata and its step list; transition counts
are always recomputed on load.
"""

import gzip
import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

from ..errors import ContractViolation
from .rollout import Step, Trajectory, TrajectoryBatch

BATCH_PATTERN = "batch_*.json*"
BATCH_NAME = re.compile(r"^batch_(\d+)\.json(\.gz)?$")


def batch_to_document(batch: TrajectoryBatch) -> Dict[str, Any]:
    return {
        "metadata": dict(batch.metadata),
        "trajectories": [[list(step) for step in trajectory.steps] for trajectory in batch.trajectories],
    }


def batch_from_document(document: Dict[str, Any]) -> TrajectoryBatch:
    """Rebuild a batch from its document, recounting transitions"""
    metadata = document.get("metadata", {})
    if "n_states" not in metadata or "n_actions" not in metadata:
        raise ContractViolation("batch document metadata needs n_states and n_actions")

    trajectories = [Trajectory(tuple(Step(*step) for step in steps)) for steps in document.get("trajectories", [])]
    return TrajectoryBatch.from_trajectories(
        trajectories, int(metadata["n_states"]), int(metadata["n_actions"]), metadata
    )


class DatasetManager:
    """
    Directory of batch files for one experiment cell

    Args:
        data_dir: Directory holding the batch files (created if missing)
        compress: Write gzip-compressed documents
    """

    def __init__(self, data_dir: Union[str, Path], compress: bool = False):
        self.logger = logging.getLogger("BayesITL.DatasetManager")
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.compress = compress

    def batch_path(self, index: int) -> Path:
        suffix = ".json.gz" if self.compress else ".json"
        return self.data_dir / f"batch_{index:04d}{suffix}"

    def save_batch(self, batch: TrajectoryBatch, index: int) -> Path:
        """Write one batch document; returns its path"""
        path = self.batch_path(index)
        document = batch_to_document(batch)
        document["metadata"]["dataset_index"] = index

        try:
            if self.compress:
                with gzip.open(path, "wt") as f:
                    json.dump(document, f)
            else:
                with open(path, "w") as f:
                    json.dump(document, f, indent=2)
        except OSError as e:
            self.logger.error(f"Failed to write batch {index} to {path}: {e}")
            raise

        self.logger.debug(f"Saved batch {index} ({len(batch.trajectories)} episodes) to {path}")
        return path

    def save_batches(self, batches: Iterable[TrajectoryBatch]) -> List[Path]:
        paths = [self.save_batch(batch, index) for index, batch in enumerate(batches)]
        self.logger.info(f"Saved {len(paths)} batches to {self.data_dir}")
        return paths

    def list_batches(self) -> List[Path]:
        """
        Batch files in dataset-index order

        Raises:
            ContractViolation: one index is stored both plain and compressed
        """
        by_index: Dict[int, Path] = {}
        for path in self.data_dir.glob(BATCH_PATTERN):
            match = BATCH_NAME.match(path.name)
            if not match:
                continue
            index = int(match.group(1))
            if index in by_index:
                raise ContractViolation(f"batch {index} is stored twice: {by_index[index].name} and {path.name}")
            by_index[index] = path
        return [by_index[index] for index in sorted(by_index)]

    def load_batches(self) -> List[TrajectoryBatch]:
        return [load_batch(path) for path in self.list_batches()]


def load_batch(path: Union[str, Path]) -> TrajectoryBatch:
    """Read a (possibly gzip-compressed) batch document"""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt") as f:
        document = json.load(f)
    return batch_from_document(document)
