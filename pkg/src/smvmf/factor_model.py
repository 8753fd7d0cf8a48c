"""Joint factorisation model: shared plus view-specific low-rank terms.

Each scaled view is approximated by two products,

    scaled_view(m)  ~=  shared_projections[m] @ shared_loadings.T
                      + specific_projections[m] @ specific_loadings[m].T

with the projection blocks of every view jointly orthonormal: each block
has orthonormal columns and the two blocks are mutually orthogonal. The
loadings live on the region axis, so row j of a loading matrix is region
j's contribution to that component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dataset as ds_mod
from .errors import ConstraintViolated, DimensionMismatch, ViewIndexOutOfRange

# absolute entry tolerance for the three orthogonality constraints
ORTHOGONALITY_TOL = 1e-8

_FMT = "%.17g"


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Factorization:
    """Fitted (or planted) factors for every view.

    shared_loadings: (p, d); shared_projections[m]: (n_m, d);
    specific_projections[m]: (n_m, r); specific_loadings[m]: (p, r).
    """

    shared_loadings: np.ndarray
    shared_projections: tuple[np.ndarray, ...]
    specific_projections: tuple[np.ndarray, ...]
    specific_loadings: tuple[np.ndarray, ...]

    def __post_init__(self):
        vs = np.asarray(self.shared_loadings, dtype=np.float64)
        if vs.ndim != 2:
            raise DimensionMismatch("shared_loadings must be 2-d")
        p, d = vs.shape
        m_counts = {
            "shared_projections": len(self.shared_projections),
            "specific_projections": len(self.specific_projections),
            "specific_loadings": len(self.specific_loadings),
        }
        if len(set(m_counts.values())) != 1:
            raise DimensionMismatch(f"inconsistent view counts: {m_counts}")
        if m_counts["shared_projections"] == 0:
            raise DimensionMismatch("factorization needs at least one view")
        r = self.specific_projections[0].shape[1] if self.specific_projections[0].ndim == 2 else -1
        for m, (u, w, v) in enumerate(
            zip(self.shared_projections, self.specific_projections, self.specific_loadings)
        ):
            if u.ndim != 2 or u.shape[1] != d:
                raise DimensionMismatch(f"view {m}: shared projection must be (n, {d})")
            if w.ndim != 2 or w.shape[0] != u.shape[0] or w.shape[1] != r:
                raise DimensionMismatch(f"view {m}: specific projection must be (n, {r})")
            if v.shape != (p, r):
                raise DimensionMismatch(f"view {m}: specific loadings must be ({p}, {r})")
        object.__setattr__(self, "shared_loadings", _freeze(vs))
        object.__setattr__(self, "shared_projections", tuple(_freeze(u) for u in self.shared_projections))
        object.__setattr__(self, "specific_projections", tuple(_freeze(w) for w in self.specific_projections))
        object.__setattr__(self, "specific_loadings", tuple(_freeze(v) for v in self.specific_loadings))

    @property
    def n_views(self) -> int:
        return len(self.shared_projections)

    @property
    def n_regions(self) -> int:
        return self.shared_loadings.shape[0]

    @property
    def shared_rank(self) -> int:
        return self.shared_loadings.shape[1]

    @property
    def specific_rank(self) -> int:
        return self.specific_loadings[0].shape[1]

    def max_constraint_violation(self) -> float:
        """Largest entry deviation over all three orthogonality constraints."""
        worst = 0.0
        for u, w in zip(self.shared_projections, self.specific_projections):
            d, r = u.shape[1], w.shape[1]
            if d:
                worst = max(worst, float(np.max(np.abs(u.T @ u - np.eye(d)))))
            if r:
                worst = max(worst, float(np.max(np.abs(w.T @ w - np.eye(r)))))
            if d and r:
                worst = max(worst, float(np.max(np.abs(u.T @ w))))
        return worst

    def require_constraints(self, tol: float = ORTHOGONALITY_TOL) -> None:
        worst = self.max_constraint_violation()
        if worst > tol:
            raise ConstraintViolated(
                f"orthogonality violated: max entry deviation {worst:.3e} > {tol:.1e}"
            )


@dataclass(frozen=True)
class Penalty:
    """Column-wise L1 penalty on the loading matrices.

    Two modes. ``weights`` uses fixed non-negative weights per column
    (shared columns are additionally multiplied by the view count inside
    the objective). ``count`` ignores weights and instead calibrates, at
    every loading update, a per-column threshold that keeps exactly
    ``nonzero_target`` entries.
    """

    mode: str
    shared_weights: np.ndarray | None = None
    specific_weights: tuple[np.ndarray, ...] | None = None
    nonzero_target: int | None = None

    def __post_init__(self):
        if self.mode not in ("weights", "count"):
            raise DimensionMismatch(f"unknown penalty mode {self.mode!r}")
        if self.mode == "weights":
            if self.shared_weights is None or self.specific_weights is None:
                raise DimensionMismatch("weights mode needs shared and specific weights")
            sw = np.asarray(self.shared_weights, dtype=np.float64)
            if sw.ndim != 1 or np.any(sw < 0):
                raise DimensionMismatch("shared weights must be a non-negative vector")
            object.__setattr__(self, "shared_weights", _freeze(sw))
            spec = []
            for m, w in enumerate(self.specific_weights):
                w = np.asarray(w, dtype=np.float64)
                if w.ndim != 1 or np.any(w < 0):
                    raise DimensionMismatch(f"view {m}: specific weights must be non-negative")
                spec.append(_freeze(w))
            object.__setattr__(self, "specific_weights", tuple(spec))
        else:
            if self.nonzero_target is None or self.nonzero_target < 1:
                raise DimensionMismatch("count mode needs nonzero_target >= 1")

    @classmethod
    def none(cls, shared_rank: int, specific_rank: int, n_views: int) -> "Penalty":
        """Unpenalised fit: all weights zero."""
        return cls(
            mode="weights",
            shared_weights=np.zeros(shared_rank),
            specific_weights=tuple(np.zeros(specific_rank) for _ in range(n_views)),
        )

    @classmethod
    def counts(cls, k: int) -> "Penalty":
        return cls(mode="count", nonzero_target=k)


def _check_compatible(f: Factorization, ds: ds_mod.MultiViewDataset) -> None:
    if f.n_views != ds.n_views or f.n_regions != ds.n_regions:
        raise DimensionMismatch(
            f"factorization is ({f.n_views} views, {f.n_regions} regions), "
            f"dataset is ({ds.n_views}, {ds.n_regions})"
        )
    for m in range(ds.n_views):
        if f.shared_projections[m].shape[0] != ds.views[m].n_subjects:
            raise DimensionMismatch(
                f"view {m}: projection rows {f.shared_projections[m].shape[0]} "
                f"!= subjects {ds.views[m].n_subjects}"
            )


def reconstruct(f: Factorization, m: int) -> np.ndarray:
    """Model value of scaled view m: shared term plus specific term."""
    if not 0 <= m < f.n_views:
        raise ViewIndexOutOfRange(f"view index {m} outside 0..{f.n_views - 1}")
    return (
        f.shared_projections[m] @ f.shared_loadings.T
        + f.specific_projections[m] @ f.specific_loadings[m].T
    )


def penalty_value(f: Factorization, penalty: Penalty) -> float:
    """L1 penalty term of the objective; zero in count mode.

    Count mode has no fixed weights (the implied threshold moves every
    iteration), so the traced objective there is the residual alone.
    """
    if penalty.mode == "count":
        return 0.0
    shared = float(np.abs(f.shared_loadings).sum(axis=0) @ penalty.shared_weights)
    total = 2.0 * f.n_views * shared
    for v, w in zip(f.specific_loadings, penalty.specific_weights):
        total += 2.0 * float(np.abs(v).sum(axis=0) @ w)
    return total


def objective(f: Factorization, ds: ds_mod.MultiViewDataset, penalty: Penalty) -> float:
    """Sum of squared residuals over views plus the weighted L1 penalty."""
    _check_compatible(f, ds)
    if penalty.mode == "weights":
        if penalty.shared_weights.shape[0] != f.shared_rank:
            raise DimensionMismatch("shared weight length != shared rank")
        if len(penalty.specific_weights) != f.n_views or any(
            w.shape[0] != f.specific_rank for w in penalty.specific_weights
        ):
            raise DimensionMismatch("specific weight shape != (views, specific rank)")
    residual = 0.0
    for m in range(f.n_views):
        diff = ds_mod.scaled_view(ds, m) - reconstruct(f, m)
        residual += float(np.sum(diff * diff))
    return residual + penalty_value(f, penalty)


@dataclass(frozen=True)
class VarianceReport:
    """Variance bookkeeping per view and per region.

    ``shared`` is view-independent because the projections are orthonormal:
    the shared term's squared norm collapses onto the shared loadings.
    Fractions are never clamped; ``flagged`` marks views where any fraction
    (or the sum) exceeds 1, which signals a miscalibrated fit.
    """

    total: np.ndarray            # (M,)
    shared: float
    specific: np.ndarray         # (M,)
    shared_by_region: np.ndarray    # (p,)
    specific_by_region: np.ndarray  # (M, p)
    shared_fraction: np.ndarray  # (M,)
    specific_fraction: np.ndarray  # (M,)
    flagged: np.ndarray          # (M,) bool


def compute_variance(f: Factorization, ds: ds_mod.MultiViewDataset) -> VarianceReport:
    """Split each view's total sample variance into shared and specific parts."""
    _check_compatible(f, ds)
    f.require_constraints()
    total = np.array([ds_mod.total_sample_variance(ds, m) for m in range(ds.n_views)])
    shared = float(np.sum(f.shared_loadings * f.shared_loadings))
    shared_by_region = np.sum(f.shared_loadings * f.shared_loadings, axis=1)
    specific = np.array([float(np.sum(v * v)) for v in f.specific_loadings])
    specific_by_region = np.stack(
        [np.sum(v * v, axis=1) for v in f.specific_loadings], axis=0
    )
    shared_fraction = shared / total
    specific_fraction = specific / total
    flagged = (
        (shared_fraction > 1.0)
        | (specific_fraction > 1.0)
        | (shared_fraction + specific_fraction > 1.0)
    )
    return VarianceReport(
        total=total,
        shared=shared,
        specific=specific,
        shared_by_region=shared_by_region,
        specific_by_region=specific_by_region,
        shared_fraction=shared_fraction,
        specific_fraction=specific_fraction,
        flagged=flagged,
    )


def _write_array(lines: list[str], name: str, a: np.ndarray) -> None:
    lines.append(f"array {name} {a.shape[0]} {a.shape[1]}")
    for row in a:
        lines.append(" ".join(_FMT % x for x in row))


def to_text(f: Factorization, source_sha256: str = "-") -> str:
    """Serialise to one plain-text document; floats keep full precision.

    ``source_sha256`` optionally records a digest of the dataset the model
    was fitted on (manifest plus the view files it lists), so later
    projection runs can warn on mismatched input.
    """
    lines = [
        "smvmf-model 1",
        f"views {f.n_views}",
        f"regions {f.n_regions}",
        f"shared_rank {f.shared_rank}",
        f"specific_rank {f.specific_rank}",
        f"source_sha256 {source_sha256}",
    ]
    _write_array(lines, "shared_loadings", f.shared_loadings)
    for m in range(f.n_views):
        _write_array(lines, f"shared_projections_{m}", f.shared_projections[m])
        _write_array(lines, f"specific_projections_{m}", f.specific_projections[m])
        _write_array(lines, f"specific_loadings_{m}", f.specific_loadings[m])
    return "\n".join(lines) + "\n"


def from_text(text: str) -> tuple[Factorization, str]:
    """Inverse of :func:`to_text`; returns the model and the stored digest."""
    lines = text.splitlines()
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise DimensionMismatch("model document truncated")
        line = lines[pos]
        pos += 1
        return line

    if take() != "smvmf-model 1":
        raise DimensionMismatch("not a recognised model document")

    header: dict[str, str] = {}
    for key in ("views", "regions", "shared_rank", "specific_rank", "source_sha256"):
        name, _, value = take().partition(" ")
        if name != key:
            raise DimensionMismatch(f"model header: expected {key!r}, found {name!r}")
        header[key] = value
    n_views = int(header["views"])
    p = int(header["regions"])
    d = int(header["shared_rank"])
    r = int(header["specific_rank"])

    def read_array(name: str, rows: int, cols: int) -> np.ndarray:
        tag = take().split()
        if tag[:2] != ["array", name] or [int(tag[2]), int(tag[3])] != [rows, cols]:
            raise DimensionMismatch(f"model document: expected array {name} {rows} {cols}")
        data = np.empty((rows, cols))
        for i in range(rows):
            cells = take().split()
            if len(cells) != cols:
                raise DimensionMismatch(f"array {name}: row {i} has {len(cells)} cells")
            data[i] = [float(c) for c in cells]
        return data

    shared_loadings = read_array("shared_loadings", p, d)
    shared_projections, specific_projections, specific_loadings = [], [], []
    for m in range(n_views):
        if pos >= len(lines):
            raise DimensionMismatch("model document truncated")
        tag = lines[pos].split()
        if len(tag) != 4:
            raise DimensionMismatch(f"model document: bad array header {lines[pos]!r}")
        n_m = int(tag[2])
        shared_projections.append(read_array(f"shared_projections_{m}", n_m, d))
        specific_projections.append(read_array(f"specific_projections_{m}", n_m, r))
        specific_loadings.append(read_array(f"specific_loadings_{m}", p, r))
    f = Factorization(
        shared_loadings=shared_loadings,
        shared_projections=tuple(shared_projections),
        specific_projections=tuple(specific_projections),
        specific_loadings=tuple(specific_loadings),
    )
    return f, header["source_sha256"]
