"""Alternating minimisation for the joint factorisation.

Each iteration runs two closed-form half-steps:

  projections: per view, the jointly orthonormal [shared | specific] block
      is the polar factor of scaled_view @ [shared_loadings | specific_loadings],
      the orthogonal-Procrustes minimiser of the residual;
  loadings: per column, soft-thresholding of the back-projected data. The
      shared column's target averages the back-projections over views,
      which is where the view-count factor on the shared penalty goes.

In weights mode both half-steps are exact coordinate minimisers, so the
objective never increases. In count mode the threshold is recalibrated
every pass (exactly k survivors per column) and descent is not guaranteed;
the trace records the objective either way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dataset as ds_mod
from .errors import DegenerateData, DimensionMismatch, RankTooLarge
from .factor_model import Factorization, Penalty, objective

# singular values below RANK_TOL * largest are treated as zero
RANK_TOL = 1e-12


@dataclass(frozen=True)
class FitConfig:
    shared_rank: int
    specific_rank: int
    penalty: Penalty
    max_iters: int = 500
    rel_tol: float = 1e-8

    def __post_init__(self):
        if self.shared_rank < 0 or self.specific_rank < 0:
            raise RankTooLarge("ranks must be non-negative")
        if self.shared_rank + self.specific_rank < 1:
            raise RankTooLarge("model needs at least one component")
        if self.max_iters < 1:
            raise DimensionMismatch("max_iters must be positive")
        if not self.rel_tol > 0:
            raise DimensionMismatch("rel_tol must be positive")


@dataclass(frozen=True)
class FitTrace:
    """Per-iteration instrumentation.

    ``objective[0]`` and ``max_violation[0]`` describe the initial model;
    entry t >= 1 describes the state after full iteration t.
    ``projection_objective[t-1]`` is the mid-iteration value after the
    projection half-step of iteration t. ``converged`` means the absolute
    objective change between consecutive iterations fell below
    rel_tol * objective[0].
    """

    objective: np.ndarray
    projection_objective: np.ndarray
    max_violation: np.ndarray
    iterations: int
    converged: bool


def soft_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    """Shrink towards zero; entries at or below the threshold vanish."""
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def count_threshold(target: np.ndarray, k: int) -> float:
    """Threshold keeping exactly k entries of ``target``: midway between
    the k-th and (k+1)-th largest magnitudes (ties ordered by region index,
    lower index counted as larger)."""
    p = target.shape[0]
    if k >= p:
        return 0.0
    magnitudes = np.abs(target)
    # lexsort: last key is primary, so order by -|t| then by index
    order = np.lexsort((np.arange(p), -magnitudes))
    return 0.5 * (magnitudes[order[k - 1]] + magnitudes[order[k]])


def polar_factor(target: np.ndarray) -> np.ndarray:
    """Orthonormal polar factor of an n x q matrix (n >= q).

    Nearly-zero singular directions are replaced by a deterministic
    orthonormal completion: Gram-Schmidt over unit coordinate vectors in
    index order, so degenerate inputs still give a reproducible result.
    """
    n, q = target.shape
    if q == 0:
        return np.zeros((n, 0))
    if n < q:
        raise RankTooLarge(f"polar factor needs at least {q} rows, got {n}")
    left, sing, right_t = np.linalg.svd(target, full_matrices=False)
    top = sing[0] if sing.size else 0.0
    keep = int(np.sum(sing > RANK_TOL * top)) if top > 0 else 0
    if keep == q:
        return left @ right_t
    basis = [left[:, i] for i in range(keep)]
    for i in range(n):
        if len(basis) == q:
            break
        candidate = np.zeros(n)
        candidate[i] = 1.0
        for _ in range(2):  # twice for numerical orthogonality
            for b in basis:
                candidate -= b * (b @ candidate)
        norm = np.linalg.norm(candidate)
        if norm > 1e-6:
            basis.append(candidate / norm)
    if len(basis) < q:
        raise DegenerateData("could not complete an orthonormal basis")
    return np.column_stack(basis) @ right_t


def init(ds: ds_mod.MultiViewDataset, cfg: FitConfig) -> Factorization:
    """Spectral starting point.

    Shared loadings come from the top right singular vectors of the
    vertically stacked scaled views, scaled by the singular values; each
    view's specific loadings come from the leading directions of what the
    shared basis leaves behind. Projections are polar factors, so every
    orthogonality constraint holds from the first iterate.
    """
    if not ds.centered:
        raise ValueError("init requires a centered dataset")
    d, r = cfg.shared_rank, cfg.specific_rank
    limit = min(min(v.n_subjects for v in ds.views), ds.n_regions)
    if d + r > limit:
        raise RankTooLarge(
            f"shared rank {d} + specific rank {r} exceeds min(subjects, regions) = {limit}"
        )
    scaled = [ds_mod.scaled_view(ds, m) for m in range(ds.n_views)]
    stack = np.vstack(scaled)
    _, sing, right_t = np.linalg.svd(stack, full_matrices=False)
    top = sing[0] if sing.size else 0.0
    if top == 0.0 or int(np.sum(sing > RANK_TOL * top)) < d + r:
        raise DegenerateData(
            f"stacked data has rank below the requested {d} + {r} components"
        )
    shared_basis = right_t[:d].T                      # (p, d), orthonormal
    shared_loadings = shared_basis * sing[:d]

    shared_projections, specific_projections, specific_loadings = [], [], []
    for a in scaled:
        residual = a - (a @ shared_basis) @ shared_basis.T
        _, res_sing, res_right_t = np.linalg.svd(residual, full_matrices=False)
        specific = res_right_t[:r].T * res_sing[:r]   # (p, r)
        block = polar_factor(a @ np.hstack([shared_loadings, specific]))
        shared_projections.append(block[:, :d])
        specific_projections.append(block[:, d:])
        specific_loadings.append(specific)
    return Factorization(
        shared_loadings=shared_loadings,
        shared_projections=tuple(shared_projections),
        specific_projections=tuple(specific_projections),
        specific_loadings=tuple(specific_loadings),
    )


def update_projections(f: Factorization, ds: ds_mod.MultiViewDataset) -> Factorization:
    """Per view, replace [shared | specific] projections with the polar
    factor of scaled_view @ [shared | specific loadings]. Minimises the
    residual over the joint orthonormality constraints with loadings fixed.
    """
    d = f.shared_rank
    shared_projections, specific_projections = [], []
    for m in range(f.n_views):
        a = ds_mod.scaled_view(ds, m)
        block = polar_factor(a @ np.hstack([f.shared_loadings, f.specific_loadings[m]]))
        shared_projections.append(block[:, :d])
        specific_projections.append(block[:, d:])
    return Factorization(
        shared_loadings=f.shared_loadings,
        shared_projections=tuple(shared_projections),
        specific_projections=tuple(specific_projections),
        specific_loadings=f.specific_loadings,
    )


def update_loadings(
    f: Factorization, ds: ds_mod.MultiViewDataset, penalty: Penalty
) -> Factorization:
    """Exact minimiser over the loadings with projections fixed.

    Requires the orthogonality constraints to hold (the cross terms in the
    expansion vanish only then); per-entry problems then decouple into
    scalar soft-thresholding.
    """
    f.require_constraints()
    d, r, n_views = f.shared_rank, f.specific_rank, f.n_views
    if penalty.mode == "count":
        k = penalty.nonzero_target
        if k > f.n_regions:
            raise DimensionMismatch(
                f"nonzero target {k} exceeds region count {f.n_regions}"
            )
    else:
        if penalty.shared_weights.shape[0] != d:
            raise DimensionMismatch("shared weight length != shared rank")
        if len(penalty.specific_weights) != n_views or any(
            w.shape[0] != r for w in penalty.specific_weights
        ):
            raise DimensionMismatch("specific weight shape != (views, specific rank)")

    scaled = [ds_mod.scaled_view(ds, m) for m in range(n_views)]

    shared_target = np.zeros((f.n_regions, d))
    for a, u in zip(scaled, f.shared_projections):
        shared_target += a.T @ u
    shared_target /= n_views

    shared_loadings = np.empty_like(shared_target)
    for col in range(d):
        if penalty.mode == "count":
            lam = count_threshold(shared_target[:, col], penalty.nonzero_target)
        else:
            lam = float(penalty.shared_weights[col])
        shared_loadings[:, col] = soft_threshold(shared_target[:, col], lam)

    specific_loadings = []
    for m in range(n_views):
        target = scaled[m].T @ f.specific_projections[m]
        new = np.empty_like(target)
        for col in range(r):
            if penalty.mode == "count":
                lam = count_threshold(target[:, col], penalty.nonzero_target)
            else:
                lam = float(penalty.specific_weights[m][col])
            new[:, col] = soft_threshold(target[:, col], lam)
        specific_loadings.append(new)
    return Factorization(
        shared_loadings=shared_loadings,
        shared_projections=f.shared_projections,
        specific_projections=f.specific_projections,
        specific_loadings=tuple(specific_loadings),
    )


def fit(ds: ds_mod.MultiViewDataset, cfg: FitConfig) -> tuple[Factorization, FitTrace]:
    """Run alternating minimisation from the spectral start.

    Stops when the absolute objective change over one full iteration drops
    below rel_tol relative to the initial objective, or at max_iters.
    """
    f = init(ds, cfg)
    objectives = [objective(f, ds, cfg.penalty)]
    projection_objectives: list[float] = []
    violations = [f.max_constraint_violation()]
    scale = objectives[0]
    if scale <= 0.0:
        # spectral start already exact; nothing to iterate on
        return f, FitTrace(
            objective=np.array(objectives),
            projection_objective=np.array([]),
            max_violation=np.array(violations),
            iterations=0,
            converged=True,
        )
    converged = False
    iterations = 0
    for _ in range(cfg.max_iters):
        f = update_projections(f, ds)
        projection_objectives.append(objective(f, ds, cfg.penalty))
        f = update_loadings(f, ds, cfg.penalty)
        objectives.append(objective(f, ds, cfg.penalty))
        violations.append(f.max_constraint_violation())
        iterations += 1
        if abs(objectives[-2] - objectives[-1]) < cfg.rel_tol * scale:
            converged = True
            break
    return f, FitTrace(
        objective=np.array(objectives),
        projection_objective=np.array(projection_objectives),
        max_violation=np.array(violations),
        iterations=iterations,
        converged=converged,
    )
