"""Python bindings for the bsda segmentation toolkit."""

from ._bsda import (
    BsdaError,
    boundary_heatmap,
    brute_force_sdm,
    compute_sdm,
    dice_jaccard,
    edt,
    heatsum,
    normalize_sdm,
    score,
    surface_distances,
    synthetic_sample,
)

__all__ = [
    "BsdaError",
    "boundary_heatmap",
    "brute_force_sdm",
    "compute_sdm",
    "dice_jaccard",
    "edt",
    "heatsum",
    "normalize_sdm",
    "score",
    "surface_distances",
    "synthetic_sample",
]
