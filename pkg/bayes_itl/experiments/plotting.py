#!/usr/bin/env python3
"""
Histogram rendering for per-dataset metric distributions.

SVG output is reproducible: the id salt is fixed, the date is omitted, and
every bar carries the id ``bin-<method>-<i>-<count>`` so bin counts can be
read back from the file.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")  # noqa
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger("BayesITL.Plotting")

SVG_RC = {"svg.hashsalt": "bayes-itl", "svg.fonttype": "none"}
DEFAULT_BINS = 20


def histogram_counts(values: Sequence[float], bins: Union[int, np.ndarray] = DEFAULT_BINS) -> Tuple[np.ndarray, np.ndarray]:
    """np.histogram over the finite values"""
    values = np.asarray(values, dtype=float)
    return np.histogram(values[np.isfinite(values)], bins=bins)


def plot_histograms(values_by_method: Dict[str, Sequence[float]],
                    out_path: Union[str, Path],
                    bins: int = DEFAULT_BINS,
                    title: Optional[str] = None,
                    xlabel: str = "Q* metric") -> Dict[str, np.ndarray]:
    """
    Overlaid histograms sharing one set of bin edges

    Returns:
        Map method -> bin counts as drawn
    """
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    finite = [np.asarray(v, dtype=float) for v in values_by_method.values()]
    pooled = np.concatenate([v[np.isfinite(v)] for v in finite]) if finite else np.array([])
    edges = np.histogram_bin_edges(pooled, bins=bins) if pooled.size else np.linspace(0.0, 1.0, bins + 1)

    drawn = {}
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.5, 4.2), dpi=100)
        for method, values in values_by_method.items():
            counts, _ = histogram_counts(values, edges)
            bars = ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge", alpha=0.5,
                          label=method, edgecolor="black", linewidth=0.5)
            for i, (patch, count) in enumerate(zip(bars.patches, counts)):
                patch.set_gid(f"bin-{method}-{i}-{int(count)}")
            drawn[method] = counts

        ax.set_xlabel(xlabel)
        ax.set_ylabel("datasets")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right")
        fig.savefig(out_path, format="svg", metadata={"Date": None}, bbox_inches="tight")
        plt.close(fig)

    logger.debug(f"Wrote histogram {out_path}")
    return drawn
