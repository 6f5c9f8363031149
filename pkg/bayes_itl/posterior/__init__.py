"""
Transition Posterior

Dirichlet-Multinomial posterior over transition rows.
"""

from .dirichlet import (
    DirichletPosterior,
    fit_posterior,
    posterior_mean,
    sample_full,
    sample_row,
    sample_rows,
)

__all__ = [
    "DirichletPosterior",
    "fit_posterior",
    "posterior_mean",
    "sample_full",
    "sample_row",
    "sample_rows",
]
