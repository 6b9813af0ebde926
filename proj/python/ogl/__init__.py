"""Overlapping group lasso: overlap norm, solver and theory helpers."""

from ._core import (
    __version__,
    adaptive_weights,
    chi2_tail_bound,
    check_assumption,
    contiguous_groups,
    fit,
    fit_path,
    lambda_max,
    overlap_norm,
    partition_support,
    theory_constants,
)

__all__ = [
    "__version__",
    "adaptive_weights",
    "chi2_tail_bound",
    "check_assumption",
    "contiguous_groups",
    "fit",
    "fit_path",
    "lambda_max",
    "overlap_norm",
    "partition_support",
    "theory_constants",
]
