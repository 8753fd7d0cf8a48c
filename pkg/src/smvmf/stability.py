"""Stability selection over bootstrap subsamples of each view.

Many sparse fits are run on random subsamples of the subjects; the
fraction of fits in which a region's loading stays nonzero is its
selection probability (SP). Regions are then ranked per component, which
is far more stable than reading a single fit's support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .dataset import MultiViewDataset, ViewMatrix, center_columns
from .errors import (
    DimensionMismatch,
    ExcessiveSubsampleFailures,
    SmvmfError,
    UnknownComponent,
)
from .solver import FitConfig, fit

SHARED_COMPONENT = "shared"

# a run aborts when more than this fraction of subsample fits fail
MAX_FAILURE_RATE = 0.01


@dataclass(frozen=True)
class StabilityConfig:
    """Settings for one stability run.

    Parameters
    ----------
    n_subsamples : int
        Number of bootstrap subsamples (each one full sparse fit).
    fit : FitConfig
        Per-subsample fit settings; the penalty must be count mode so each
        fit selects the same number of regions per column.
    subsample_fraction : float
        Per view, ceil(fraction * n_subjects) rows are drawn.
    seed : int
        Master seed; subsample i uses the stream spawned with key (i,),
        so results do not depend on execution order or worker count.
    with_replacement : bool
        Bootstrap by default; False draws without replacement instead,
        useful as a sensitivity check.
    """

    n_subsamples: int
    fit: FitConfig
    subsample_fraction: float = 0.5
    seed: int = 0
    with_replacement: bool = True

    def __post_init__(self):
        if self.n_subsamples < 1:
            raise DimensionMismatch("n_subsamples must be positive")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise DimensionMismatch("subsample_fraction must lie in (0, 1]")
        if self.fit.penalty.mode != "count":
            raise DimensionMismatch("stability selection needs a count-mode penalty")


@dataclass(frozen=True)
class StabilityReport:
    """Selection probabilities and ranking inputs per component.

    Components are keyed "shared" and "specific-<view name>". ``sp`` and
    ``mean_abs_loading`` are (component, region) arrays; the mean is taken
    over the subsamples that selected the region (zero if never selected).
    """

    components: tuple[str, ...]
    regions: tuple[str, ...]
    sp: np.ndarray
    mean_abs_loading: np.ndarray
    n_success: int
    n_failed: int
    failed_indices: tuple[int, ...]

    def component_index(self, component: str) -> int:
        try:
            return self.components.index(component)
        except ValueError:
            raise UnknownComponent(
                f"component {component!r} not in {self.components}"
            ) from None

    def tie_groups(self, component: str) -> tuple[tuple[int, ...], ...]:
        """Groups of regions whose SPs are exactly equal (size > 1 only)."""
        c = self.component_index(component)
        by_value: dict[float, list[int]] = {}
        for j, value in enumerate(self.sp[c]):
            by_value.setdefault(float(value), []).append(j)
        return tuple(
            tuple(group) for group in by_value.values() if len(group) > 1
        )


def _derive_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def draw_subsample(
    ds: MultiViewDataset,
    fraction: float,
    rng: np.random.Generator | int,
    with_replacement: bool = True,
) -> MultiViewDataset:
    """Draw ceil(fraction * n) subjects per view and re-center columns.

    Views are drawn independently (subjects are not linked across views).
    With replacement a subject may repeat; repeated ids are suffixed with
    their occurrence number to stay distinct in reports.
    """
    if isinstance(rng, int):
        rng = np.random.default_rng(rng)
    views = []
    for view in ds.views:
        n = view.n_subjects
        size = math.ceil(fraction * n)
        if with_replacement:
            idx = rng.integers(0, n, size=size)
        else:
            idx = rng.permutation(n)[:size]
        counts: dict[str, int] = {}
        subjects = []
        for i in idx:
            base = view.subjects[i]
            counts[base] = counts.get(base, 0) + 1
            subjects.append(base if counts[base] == 1 else f"{base}#{counts[base]}")
        views.append(
            ViewMatrix(
                name=view.name,
                subjects=tuple(subjects),
                values=view.values[idx],
                labels=None if view.labels is None else view.labels[idx],
            )
        )
    raw = MultiViewDataset(views=tuple(views), regions=ds.regions, centered=False)
    return center_columns(raw)


def component_names(ds: MultiViewDataset) -> tuple[str, ...]:
    return (SHARED_COMPONENT,) + tuple(f"specific-{v.name}" for v in ds.views)


def _run_one(ds, cfg: StabilityConfig, index: int):
    """One subsample: draw, fit, report selection masks and row magnitudes.

    Returns (index, selected, magnitude) where selected is a (C, p) bool
    array; on a failed fit returns (index, None, code).
    """
    rng = _derive_rng(cfg.seed, index)
    sub = draw_subsample(ds, cfg.subsample_fraction, rng, cfg.with_replacement)
    try:
        f, _ = fit(sub, cfg.fit)
    except (SmvmfError, np.linalg.LinAlgError) as err:
        code = getattr(err, "code", "numpy.linalg_error")
        return index, None, code
    loadings = [f.shared_loadings] + list(f.specific_loadings)
    selected = np.stack([np.any(mat != 0.0, axis=1) for mat in loadings])
    magnitude = np.stack([np.max(np.abs(mat), axis=1) for mat in loadings])
    return index, selected, magnitude


def run_stability(
    ds: MultiViewDataset,
    cfg: StabilityConfig,
    threads: int | None = None,
) -> StabilityReport:
    """Run the full subsample loop and aggregate selection probabilities.

    Failed subsample fits (rank-deficient draws and the like) are recorded
    and excluded from the SP denominator; the run aborts if more than 1%
    of subsamples fail. Results are reduced in subsample order, so any
    thread count gives bit-identical output for the same seed.
    """
    if threads == 1:
        results = [_run_one(ds, cfg, i) for i in range(cfg.n_subsamples)]
    else:
        n_jobs = -1 if threads is None else threads
        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_one)(ds, cfg, i) for i in range(cfg.n_subsamples)
        )
    results.sort(key=lambda item: item[0])

    names = component_names(ds)
    p = ds.n_regions
    counts = np.zeros((len(names), p), dtype=np.int64)
    magnitude_sums = np.zeros((len(names), p))
    failed: list[int] = []
    for index, selected, payload in results:
        if selected is None:
            failed.append(index)
            continue
        counts += selected
        magnitude_sums += np.where(selected, payload, 0.0)
    n_failed = len(failed)
    n_success = cfg.n_subsamples - n_failed
    if n_failed > MAX_FAILURE_RATE * cfg.n_subsamples:
        raise ExcessiveSubsampleFailures(
            f"{n_failed} of {cfg.n_subsamples} subsample fits failed "
            f"(> {MAX_FAILURE_RATE:.0%}); first failures: {failed[:5]}"
        )
    if n_success == 0:
        raise ExcessiveSubsampleFailures("every subsample fit failed")
    sp = counts / n_success
    with np.errstate(invalid="ignore"):
        mean_abs = np.where(counts > 0, magnitude_sums / np.maximum(counts, 1), 0.0)
    return StabilityReport(
        components=names,
        regions=ds.regions,
        sp=sp,
        mean_abs_loading=mean_abs,
        n_success=n_success,
        n_failed=n_failed,
        failed_indices=tuple(failed),
    )


def rank_regions(report: StabilityReport, component: str) -> list[int]:
    """Region indices ordered by SP descending; ties fall back to the mean
    absolute loading across selecting subsamples, then to region index."""
    c = report.component_index(component)
    sp = report.sp[c]
    mag = report.mean_abs_loading[c]
    return sorted(range(len(sp)), key=lambda j: (-sp[j], -mag[j], j))
