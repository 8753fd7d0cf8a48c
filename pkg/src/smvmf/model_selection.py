"""Choosing the shared rank by explained-variance scan.

Candidate shared ranks are tried in increasing order with the specific
rank held fixed and no sparsity penalty; the smallest candidate for which
at least one view's shared-plus-specific variance fraction reaches the
threshold wins. Each candidate is refit from its own spectral start, so
the scan is embarrassingly parallel; results are merged in candidate
order either way, which keeps the outcome independent of thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from . import dataset as ds_mod
from .errors import DimensionMismatch, NotReached, ViewIndexOutOfRange
from .factor_model import Factorization, Penalty
from .solver import FitConfig, fit


def variance_explained(
    f: Factorization, ds: ds_mod.MultiViewDataset, m: int
) -> tuple[float, float]:
    """(shared, specific) variance fractions of view m under model f."""
    if not 0 <= m < ds.n_views:
        raise ViewIndexOutOfRange(f"view index {m} outside 0..{ds.n_views - 1}")
    total = ds_mod.total_sample_variance(ds, m)
    shared = float(np.sum(f.shared_loadings * f.shared_loadings))
    specific = float(np.sum(f.specific_loadings[m] * f.specific_loadings[m]))
    return shared / total, specific / total


@dataclass(frozen=True)
class RankCandidate:
    """One row of the rank scan table."""

    shared_rank: int
    shared_fraction: tuple[float, ...]    # per view
    specific_fraction: tuple[float, ...]  # per view
    qualifying: bool


def _evaluate(ds: ds_mod.MultiViewDataset, cfg: FitConfig, threshold: float, d: int) -> RankCandidate:
    candidate_cfg = replace(
        cfg,
        shared_rank=d,
        penalty=Penalty.none(d, cfg.specific_rank, ds.n_views),
    )
    f, _ = fit(ds, candidate_cfg)
    shared, specific = [], []
    for m in range(ds.n_views):
        s, t = variance_explained(f, ds, m)
        shared.append(s)
        specific.append(t)
    qualifying = any(s + t >= threshold for s, t in zip(shared, specific))
    return RankCandidate(d, tuple(shared), tuple(specific), qualifying)


def select_shared_rank(
    ds: ds_mod.MultiViewDataset,
    specific_rank: int,
    threshold: float,
    cfg: FitConfig | None = None,
    threads: int | None = None,
) -> tuple[int, list[RankCandidate]]:
    """Smallest shared rank whose fit explains ``threshold`` of the total
    variance (shared + specific fractions) in at least one view.

    Returns the winning rank and the scan table up to and including it.
    Raises NotReached (carrying the full table) when no candidate within
    min(subjects, regions) - specific_rank qualifies.
    """
    if not 0.0 < threshold <= 1.0:
        raise DimensionMismatch(f"threshold must lie in (0, 1], got {threshold}")
    if cfg is None:
        cfg = FitConfig(
            shared_rank=1,
            specific_rank=specific_rank,
            penalty=Penalty.none(1, specific_rank, ds.n_views),
        )
    limit = min(min(v.n_subjects for v in ds.views), ds.n_regions)
    d_max = limit - specific_rank
    if d_max < 1:
        raise NotReached(
            f"no room for a shared component: specific rank {specific_rank} "
            f"already uses the full budget {limit}"
        )
    rows: list[RankCandidate] = []
    candidates = list(range(1, d_max + 1))
    if threads == 1:
        for d in candidates:
            row = _evaluate(ds, cfg, threshold, d)
            rows.append(row)
            if row.qualifying:
                return d, rows
    else:
        # chunked parallel scan with ordered early exit: rows are emitted in
        # candidate order, so thread count cannot change the result
        n_jobs = -1 if threads is None else threads
        chunk = max(1, n_jobs) if n_jobs > 0 else 4
        pool = Parallel(n_jobs=n_jobs)
        for start in range(0, len(candidates), chunk):
            batch = candidates[start : start + chunk]
            results = pool(delayed(_evaluate)(ds, cfg, threshold, d) for d in batch)
            for row in results:
                rows.append(row)
                if row.qualifying:
                    return row.shared_rank, rows
    raise NotReached(
        f"no shared rank up to {d_max} reaches threshold {threshold} in any view",
        rows=rows,
    )
