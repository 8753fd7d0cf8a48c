"""Low-dimensional projections, discriminant boundaries, PCA baseline.

The per-person joint coordinates of view m are the columns of
[shared_projections | specific_projections]; together with the combined
loadings they reproduce the scaled view, which this module verifies and
reports as a residual norm per view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dataset as ds_mod
from .errors import (
    DegenerateClass,
    DimensionMismatch,
    SingularCovariance,
    ViewIndexOutOfRange,
)
from .factor_model import Factorization, _check_compatible


@dataclass(frozen=True)
class ProjectionSet:
    """Joint coordinates and loadings per view, plus fit diagnostics.

    Axis k of the coordinates is labelled "shared-<k>" for the first
    shared_rank axes and "specific-<k>" for the rest. ``residual_norm`` is
    the Frobenius distance between the scaled view and its reconstruction;
    ``data_norm`` is the scaled view's own Frobenius norm.
    """

    axis_labels: tuple[str, ...]
    coordinates: tuple[np.ndarray, ...]   # per view (n_m, d + r)
    loadings: tuple[np.ndarray, ...]      # per view (p, d + r)
    subjects: tuple[tuple[str, ...], ...]
    labels: tuple[np.ndarray | None, ...]
    residual_norm: np.ndarray             # (M,)
    data_norm: np.ndarray                 # (M,)

    @property
    def shared_rank(self) -> int:
        return sum(1 for a in self.axis_labels if a.startswith("shared-"))

    def specific_coordinates(self, m: int) -> np.ndarray:
        return self.coordinates[m][:, self.shared_rank :]


def project(f: Factorization, ds: ds_mod.MultiViewDataset) -> ProjectionSet:
    """Assemble each view's joint coordinate block and verify it still
    reproduces the scaled view."""
    _check_compatible(f, ds)
    d, r = f.shared_rank, f.specific_rank
    axis_labels = tuple(
        [f"shared-{k + 1}" for k in range(d)] + [f"specific-{k + 1}" for k in range(r)]
    )
    coordinates, loadings, residual, data = [], [], [], []
    for m in range(ds.n_views):
        coords = np.hstack([f.shared_projections[m], f.specific_projections[m]])
        loads = np.hstack([f.shared_loadings, f.specific_loadings[m]])
        a = ds_mod.scaled_view(ds, m)
        coordinates.append(coords)
        loadings.append(loads)
        residual.append(float(np.linalg.norm(a - coords @ loads.T)))
        data.append(float(np.linalg.norm(a)))
    return ProjectionSet(
        axis_labels=axis_labels,
        coordinates=tuple(coordinates),
        loadings=tuple(loadings),
        subjects=tuple(v.subjects for v in ds.views),
        labels=tuple(v.labels for v in ds.views),
        residual_norm=np.array(residual),
        data_norm=np.array(data),
    )


@dataclass(frozen=True)
class LdaSummary:
    """Two-class linear discriminant in a 2-d coordinate plane.

    The boundary is the line normal . x = offset; points with
    normal . x > offset fall on side 1, the side of class 1's mean.
    ``drawn`` is True only when training accuracy beats always guessing
    the majority class. ``side_percentages[c, s]`` is the percentage of
    class c on side s.
    """

    normal: np.ndarray
    offset: float
    accuracy: float
    majority_prior: float
    drawn: bool
    side_percentages: np.ndarray


def lda_boundary(coordinates: np.ndarray, labels: np.ndarray) -> LdaSummary:
    """Equal-prior linear discriminant between labels 0 and 1.

    Uses the pooled within-class covariance; the boundary passes through
    the midpoint of the class means.
    """
    coords = np.asarray(coordinates, dtype=np.float64)
    labels = np.asarray(labels)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise DegenerateClass(f"expected (n, 2) coordinates, got {coords.shape}")
    if labels.shape != (coords.shape[0],):
        raise DegenerateClass("labels must align with coordinate rows")
    class0 = coords[labels == 0]
    class1 = coords[labels == 1]
    if len(class0) < 2 or len(class1) < 2:
        raise DegenerateClass(
            f"need at least two members per class, got {len(class0)} and {len(class1)}"
        )
    mean0 = class0.mean(axis=0)
    mean1 = class1.mean(axis=0)
    centered0 = class0 - mean0
    centered1 = class1 - mean1
    pooled = (centered0.T @ centered0 + centered1.T @ centered1) / (len(coords) - 2)
    det = pooled[0, 0] * pooled[1, 1] - pooled[0, 1] * pooled[1, 0]
    scale = float(np.max(np.abs(pooled)))
    if scale == 0.0 or abs(det) <= 1e-12 * scale * scale:
        raise SingularCovariance(
            f"pooled covariance is numerically singular (det {det:.3e})"
        )
    normal = np.linalg.solve(pooled, mean1 - mean0)
    offset = float(normal @ (mean0 + mean1) / 2.0)

    side1 = coords @ normal > offset
    predicted = side1.astype(np.int64)
    accuracy = float(np.mean(predicted == labels))
    majority = float(max(len(class0), len(class1)) / len(coords))
    side_percentages = np.empty((2, 2))
    for c, members in enumerate((labels == 0, labels == 1)):
        on_side1 = float(np.mean(side1[members])) * 100.0
        side_percentages[c] = (100.0 - on_side1, on_side1)
    return LdaSummary(
        normal=normal,
        offset=offset,
        accuracy=accuracy,
        majority_prior=majority,
        drawn=accuracy > majority,
        side_percentages=side_percentages,
    )


def pca_baseline(
    ds: ds_mod.MultiViewDataset, m: int, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Single-view comparison point: top-k PCA of the scaled view.

    Returns (coordinates, variance_ratios): the leading k left singular
    vectors and each direction's share of the view's total variance.
    """
    if not 0 <= m < ds.n_views:
        raise ViewIndexOutOfRange(f"view index {m} outside 0..{ds.n_views - 1}")
    a = ds_mod.scaled_view(ds, m)
    if not 1 <= k <= min(a.shape):
        raise DimensionMismatch(
            f"component count {k} outside 1..{min(a.shape)} for view {m}"
        )
    left, sing, _ = np.linalg.svd(a, full_matrices=False)
    total = float(np.sum(sing * sing))
    return left[:, :k], (sing[:k] * sing[:k]) / total
