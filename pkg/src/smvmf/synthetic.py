"""Planted-model data generation and reference oracles for testing.

The generator plants a known factorisation: per view it draws jointly
orthonormal projection blocks with zero column means (so centering leaves
the noiseless signal untouched), multiplies by caller-supplied loading
templates, rescales by sqrt(n), and adds Gaussian noise. The returned
ground truth satisfies every factorisation constraint exactly.

The two oracles reimplement solver building blocks by a deliberately
different route (eigendecomposition instead of SVD; grid search instead
of the closed form) so tests can compare independent computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import MultiViewDataset, ViewMatrix
from .errors import DimensionMismatch, RankDeficient, RankTooLarge
from .factor_model import Factorization


@dataclass(frozen=True)
class PlantSpec:
    """Recipe for one synthetic multi-view dataset.

    ``shared_template`` is (p, d); ``specific_templates`` holds one (p, r)
    matrix per view. ``label_strength`` (one value per view, each in
    [0, 1]) controls how tightly labels follow the first specific
    coordinate: 1 means deterministic, 0 means pure jitter; omit it for an
    unlabelled dataset.
    """

    n_subjects: tuple[int, ...]
    shared_template: np.ndarray
    specific_templates: tuple[np.ndarray, ...]
    noise: float = 0.0
    label_strength: tuple[float, ...] | None = None
    seed: int = 0
    view_names: tuple[str, ...] | None = None
    region_names: tuple[str, ...] | None = None

    def __post_init__(self):
        shared = np.asarray(self.shared_template, dtype=np.float64)
        if shared.ndim != 2:
            raise DimensionMismatch("shared template must be 2-d")
        object.__setattr__(self, "shared_template", shared)
        if len(self.specific_templates) != len(self.n_subjects):
            raise DimensionMismatch("one specific template per view required")
        templates = []
        for t in self.specific_templates:
            t = np.asarray(t, dtype=np.float64)
            if t.ndim != 2 or t.shape[0] != shared.shape[0]:
                raise DimensionMismatch("specific templates must be (p, r)")
            templates.append(t)
        object.__setattr__(self, "specific_templates", tuple(templates))
        if self.label_strength is not None:
            if len(self.label_strength) != len(self.n_subjects):
                raise DimensionMismatch("one label strength per view required")
            if any(not 0.0 <= s <= 1.0 for s in self.label_strength):
                raise DimensionMismatch("label strengths must lie in [0, 1]")
        if self.noise < 0:
            raise DimensionMismatch("noise level must be non-negative")

    @property
    def n_views(self) -> int:
        return len(self.n_subjects)

    @property
    def n_regions(self) -> int:
        return self.shared_template.shape[0]

    @property
    def shared_rank(self) -> int:
        return self.shared_template.shape[1]

    @property
    def specific_rank(self) -> int:
        return self.specific_templates[0].shape[1]


def _planted_projections(rng: np.random.Generator, n: int, q: int) -> np.ndarray:
    """Orthonormal (n, q) block with zero column means.

    Demeaning before QR keeps every column orthogonal to the constant
    vector, so the planted signal survives column centering exactly; that
    costs one dimension, hence the n - 1 budget check in generate().
    """
    g = rng.standard_normal((n, q))
    g -= g.mean(axis=0, keepdims=True)
    q_mat, r_mat = np.linalg.qr(g)
    signs = np.sign(np.diag(r_mat))
    signs[signs == 0] = 1.0
    return q_mat * signs


def generate(
    spec: PlantSpec,
) -> tuple[MultiViewDataset, Factorization, tuple[np.ndarray | None, ...]]:
    """Build (dataset, ground truth, labels) from a plant recipe.

    Per view: data = sqrt(n) * (shared + specific signal + noise * N(0,1)).
    Labels, when requested, are 1 where the first specific coordinate plus
    (1 - strength) * jitter exceeds its median. Deterministic per seed.

    The dataset comes back uncentered, ready for the normal pipeline; the
    planted projections have zero column means, so at zero noise the later
    centering step leaves the signal bit-identical.
    """
    d, r, p = spec.shared_rank, spec.specific_rank, spec.n_regions
    view_names = spec.view_names or tuple(f"view{m + 1}" for m in range(spec.n_views))
    width = max(2, len(str(p)))
    region_names = spec.region_names or tuple(f"r{j + 1:0{width}d}" for j in range(p))
    if len(view_names) != spec.n_views or len(region_names) != p:
        raise DimensionMismatch("view or region name count does not match the recipe")

    views: list[ViewMatrix] = []
    shared_projections, specific_projections = [], []
    labels_out: list[np.ndarray | None] = []
    for m, n in enumerate(spec.n_subjects):
        if d + r > min(n - 1, p):
            raise RankTooLarge(
                f"view {m}: {d} + {r} components need at most min(n - 1, p) "
                f"= {min(n - 1, p)}"
            )
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=spec.seed, spawn_key=(m,))
        )
        block = _planted_projections(rng, n, d + r)
        u, w = block[:, :d], block[:, d:]
        signal = u @ spec.shared_template.T + w @ spec.specific_templates[m].T
        data = math.sqrt(n) * (signal + spec.noise * rng.standard_normal((n, p)))

        labels = None
        if spec.label_strength is not None and r >= 1:
            base = w[:, 0]
            jitter = rng.standard_normal(n) * float(np.std(base))
            score = base + (1.0 - spec.label_strength[m]) * jitter
            labels = (score > np.median(score)).astype(np.int64)
        labels_out.append(labels)
        shared_projections.append(u)
        specific_projections.append(w)
        views.append(
            ViewMatrix(
                name=view_names[m],
                subjects=tuple(f"{view_names[m]}-s{i + 1:03d}" for i in range(n)),
                values=data,
                labels=labels,
            )
        )
    ds = MultiViewDataset(views=tuple(views), regions=region_names, centered=False)
    truth = Factorization(
        shared_loadings=spec.shared_template,
        shared_projections=tuple(shared_projections),
        specific_projections=tuple(specific_projections),
        specific_loadings=spec.specific_templates,
    )
    return ds, truth, tuple(labels_out)


def oracle_polar(target: np.ndarray) -> np.ndarray:
    """Polar factor via eigendecomposition of the (small) gram matrix.

    Reference path for cross-checking the SVD-based production routine;
    limited to six columns to keep the conditioning honest. Raises
    RankDeficient instead of completing a basis, so comparisons against
    the production completion stay structural.
    """
    a = np.asarray(target, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] > 6:
        raise DimensionMismatch("oracle_polar expects a 2-d matrix with <= 6 columns")
    gram = a.T @ a
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]
    top = eigenvalues[0] if eigenvalues.size else 0.0
    # eigh reports an exactly-zero eigenvalue as roughly +-1e-16 * top, so
    # the deficiency cutoff must sit well above that rounding floor
    if top <= 0 or eigenvalues[-1] <= 1e-12 * top:
        raise RankDeficient("gram matrix is numerically rank deficient")
    inv_roots = 1.0 / np.sqrt(eigenvalues)
    return a @ eigenvectors @ np.diag(inv_roots) @ eigenvectors.T


def oracle_prox(target: float, weight: float) -> float:
    """Brute-force minimiser of (v - target)^2 + 2 * weight * |v|.

    Three nested grid passes over [-|target|, |target|] (the minimiser
    always lies there), each refining around the previous best; resolves
    the optimum to well within 1e-6.
    """
    if weight < 0:
        raise DimensionMismatch("weight must be non-negative")

    def value(v: float) -> float:
        return (v - target) ** 2 + 2.0 * weight * abs(v)

    bound = abs(target)
    if bound == 0.0:
        return 0.0
    lo, hi = -bound, bound
    best = 0.0  # the kink is always a candidate
    best_value = value(best)
    for _ in range(3):
        grid = np.linspace(lo, hi, 1001)
        values = (grid - target) ** 2 + 2.0 * weight * np.abs(grid)
        at = int(np.argmin(values))
        if values[at] < best_value:
            best, best_value = float(grid[at]), float(values[at])
        step = (hi - lo) / 1000.0
        lo = max(-bound, best - step)
        hi = min(bound, best + step)
    return best
