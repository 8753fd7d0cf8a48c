"""Shared fixtures and independent reference computations.

The brute-force helpers here deliberately avoid the production code paths
(explicit loops instead of matrix algebra, adjugate inversion instead of
solve) so agreement between the two is meaningful.
"""

from __future__ import annotations

import numpy as np
import pytest

from smvmf.dataset import MultiViewDataset, ViewMatrix, center_columns
from smvmf.factor_model import Factorization, Penalty


def make_dataset(arrays, regions=None, labels=None, names=None, centered=False):
    """Build a dataset straight from numpy arrays (no files involved)."""
    arrays = [np.asarray(a, dtype=float) for a in arrays]
    p = arrays[0].shape[1]
    regions = tuple(regions) if regions else tuple(f"reg{j}" for j in range(p))
    names = names or [f"view{m}" for m in range(len(arrays))]
    labels = labels or [None] * len(arrays)
    views = tuple(
        ViewMatrix(
            name=names[m],
            subjects=tuple(f"{names[m]}-s{i}" for i in range(a.shape[0])),
            values=a,
            labels=labels[m],
        )
        for m, a in enumerate(arrays)
    )
    ds = MultiViewDataset(views=views, regions=regions, centered=False)
    return center_columns(ds) if centered else ds


def random_orthonormal(rng, n, q):
    mat, r = np.linalg.qr(rng.standard_normal((n, q)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return mat * signs


def random_factorization(rng, n_list, p, d, r, loading_scale=1.0):
    """Constraint-satisfying factors with Gaussian loadings."""
    shared_projections, specific_projections, specific_loadings = [], [], []
    for n in n_list:
        block = random_orthonormal(rng, n, d + r)
        shared_projections.append(block[:, :d])
        specific_projections.append(block[:, d:])
        specific_loadings.append(loading_scale * rng.standard_normal((p, r)))
    return Factorization(
        shared_loadings=loading_scale * rng.standard_normal((p, d)),
        shared_projections=tuple(shared_projections),
        specific_projections=tuple(specific_projections),
        specific_loadings=tuple(specific_loadings),
    )


def zero_penalty(f):
    return Penalty.none(f.shared_rank, f.specific_rank, f.n_views)


def brute_objective(f, ds, penalty):
    """Triple-loop evaluation of the objective, no matrix algebra."""
    from smvmf.dataset import scaled_view

    total = 0.0
    for m in range(ds.n_views):
        a = scaled_view(ds, m)
        n, p = a.shape
        for i in range(n):
            for j in range(p):
                model = 0.0
                for k in range(f.shared_rank):
                    model += f.shared_projections[m][i, k] * f.shared_loadings[j, k]
                for k in range(f.specific_rank):
                    model += (
                        f.specific_projections[m][i, k] * f.specific_loadings[m][j, k]
                    )
                total += (a[i, j] - model) ** 2
    if penalty.mode == "weights":
        shared_l1 = 0.0
        for k in range(f.shared_rank):
            shared_l1 += penalty.shared_weights[k] * np.abs(f.shared_loadings[:, k]).sum()
        total += 2.0 * f.n_views * shared_l1
        for m in range(f.n_views):
            for k in range(f.specific_rank):
                total += (
                    2.0
                    * penalty.specific_weights[m][k]
                    * np.abs(f.specific_loadings[m][:, k]).sum()
                )
    return total


def principal_angles(a, b):
    """Angles between the column spaces of a and b, in radians."""
    from scipy.linalg import subspace_angles

    return subspace_angles(np.asarray(a), np.asarray(b))


@pytest.fixture
def rng():
    return np.random.default_rng(42)
