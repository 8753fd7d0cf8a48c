"""Sparse multi-view matrix factorisation.

Joint decomposition of several observation matrices over a common set of
regions into one shared low-rank component and per-view specific low-rank
components, with column-wise L1 sparsity, rank selection by explained
variance, stability selection for region ranking, and two-dimensional
projection export with discriminant boundaries.
"""

__version__ = "0.1.0"

from .analysis import LdaSummary, ProjectionSet, lda_boundary, pca_baseline, project
from .dataset import (
    MultiViewDataset,
    ViewMatrix,
    center_columns,
    load_views,
    scaled_view,
    total_sample_variance,
)
from .factor_model import (
    Factorization,
    Penalty,
    VarianceReport,
    compute_variance,
    objective,
    reconstruct,
)
from .model_selection import select_shared_rank, variance_explained
from .solver import FitConfig, FitTrace, fit
from .stability import StabilityConfig, StabilityReport, draw_subsample, rank_regions, run_stability
from .synthetic import PlantSpec, generate, oracle_polar, oracle_prox

__all__ = [
    "__version__",
    "MultiViewDataset",
    "ViewMatrix",
    "center_columns",
    "load_views",
    "scaled_view",
    "total_sample_variance",
    "Factorization",
    "Penalty",
    "VarianceReport",
    "compute_variance",
    "objective",
    "reconstruct",
    "FitConfig",
    "FitTrace",
    "fit",
    "select_shared_rank",
    "variance_explained",
    "StabilityConfig",
    "StabilityReport",
    "draw_subsample",
    "rank_regions",
    "run_stability",
    "LdaSummary",
    "ProjectionSet",
    "lda_boundary",
    "pca_baseline",
    "project",
    "PlantSpec",
    "generate",
    "oracle_polar",
    "oracle_prox",
]
