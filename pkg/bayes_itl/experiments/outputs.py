#!/usr/bin/env python3
"""
Experiment Outputs

Writes a MetricsReport as CSV tables, a JSON summary and SVG histograms.
Files contain no timestamps, so identical runs produce identical bytes.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

from .harness import METHOD_ORDER, MetricsReport
from .plotting import plot_histograms

logger = logging.getLogger("BayesITL.Outputs")

ACCURACY_TABLE = "accuracy_table.csv"
Q_STAR_TABLE = "q_star_metric_table.csv"
SUMMARY_TABLE = "metrics_summary.csv"
PER_DATASET = "q_star_metric_per_dataset.csv"
SUMMARY_JSON = "summary.json"
FIGURES_DIR = "figures"
FLOAT_FORMAT = "%.12g"


def format_cell(mean: float, std: float) -> str:
    """'mean ± std' with two decimals, N/A when undefined"""
    if mean is None or std is None or math.isnan(mean) or math.isnan(std):
        return "N/A"
    return f"{mean:.2f} ± {std:.2f}"


def _clean(value: Any) -> Any:
    """JSON-safe scalars; NaN becomes null"""
    if isinstance(value, float) and math.isnan(value):
        return None
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


def accuracy_table(summary: pd.DataFrame) -> pd.DataFrame:
    """One row per (K, epsilon, method) with the three accuracy columns"""
    rows = []
    for _, row in summary.iterrows():
        rows.append({
            "episodes": row["episodes"],
            "epsilon": row["epsilon"],
            "method": row["method"],
            "deterministic": format_cell(row["deterministic_accuracy_mean"], row["deterministic_accuracy_std"]),
            "stochastic": format_cell(row["stochastic_accuracy_mean"], row["stochastic_accuracy_std"]),
            "a_in_epsilon_ball": format_cell(row["mistake_ball_rate_mean"], row["mistake_ball_rate_std"]),
        })
    table = pd.DataFrame(rows, columns=["episodes", "epsilon", "method", "deterministic",
                                        "stochastic", "a_in_epsilon_ball"])
    return table.sort_values(["episodes", "epsilon"], kind="mergesort").reset_index(drop=True)


def q_star_table(summary: pd.DataFrame) -> pd.DataFrame:
    """One row per (K, method), one column per epsilon"""
    cells = summary.assign(cell=[format_cell(m, s) for m, s in
                                 zip(summary["q_star_metric_mean"], summary["q_star_metric_std"])])
    table = cells.pivot(index=["episodes", "method"], columns="epsilon", values="cell")
    table.columns = [f"epsilon={e:g}" for e in table.columns]
    return table.reset_index().sort_values(["episodes", "method"], kind="mergesort").reset_index(drop=True)


def summary_document(report: MetricsReport, summary: pd.DataFrame) -> Dict[str, Any]:
    cells = [{key: _clean(value) for key, value in row.items()} for row in summary.to_dict(orient="records")]
    for cell in cells:
        cell["method"] = str(cell["method"])
    return {
        "config": report.config.to_document(),
        "provenance": report.provenance,
        "cells": cells,
        "flagged": report.flagged,
        "flagged_runs": report.flagged_runs,
        "total_runs": report.total_runs,
    }


def emit_outputs(report: MetricsReport, out_dir: Union[str, Path]) -> List[Path]:
    """
    Write tables, summary and histograms into out_dir

    Returns:
        Paths written

    Raises:
        OSError: with the offending path when a file cannot be written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = report.summary()
    frame = report.frame()
    written = []

    def write_csv(table: pd.DataFrame, name: str):
        path = out_dir / name
        try:
            table.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        except OSError as e:
            logger.error(f"Failed to write {path}: {e}")
            raise
        written.append(path)

    write_csv(accuracy_table(summary), ACCURACY_TABLE)
    write_csv(q_star_table(summary), Q_STAR_TABLE)
    write_csv(summary, SUMMARY_TABLE)
    per_dataset = frame[["method", "epsilon", "episodes", "dataset", "q_star_metric"]].copy()
    per_dataset["method"] = per_dataset["method"].astype(str)
    write_csv(per_dataset, PER_DATASET)

    summary_path = out_dir / SUMMARY_JSON
    try:
        with open(summary_path, "w") as f:
            json.dump(summary_document(report, summary), f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        logger.error(f"Failed to write {summary_path}: {e}")
        raise
    written.append(summary_path)

    for (epsilon, episodes), cell in frame.groupby(["epsilon", "episodes"], sort=True):
        for method in METHOD_ORDER:
            values = cell.loc[cell["method"] == method, "q_star_metric"].to_numpy(dtype=float)
            if not values.size:
                continue
            path = out_dir / FIGURES_DIR / f"q_star_metric_{method}_eps{epsilon:g}_k{episodes}.svg"
            plot_histograms({method: values}, path, title=f"{method}, epsilon={epsilon:g}, K={episodes}")
            written.append(path)

    logger.info(f"Wrote {len(written)} output files to {out_dir}")
    return written
