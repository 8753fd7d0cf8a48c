"""Multi-view tabular data: ingestion, validation, centering, scaling.

A dataset bundles M observation matrices ("views") that share one ordered
list of region names (columns). Each view has its own subjects (rows) and
may carry an optional binary label per subject. Subjects are never linked
across views; the identifiers are carried through for reporting only.

View files are UTF-8 CSV with header ``subject_id,<region_1>,...,<region_p>``
and an optional trailing ``label`` column holding 0/1. A manifest is a
key-value text file mapping view name to file path, one per line, in view
order; relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    AlreadyCentered,
    ConfigParseError,
    DuplicateSubjectInView,
    EmptyView,
    MismatchedRegions,
    NonNumericCell,
    ViewIndexOutOfRange,
)

ID_COLUMN = "subject_id"
LABEL_COLUMN = "label"


def _readonly(values: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(values, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ViewMatrix:
    """One observation matrix: subjects by regions, plus optional labels.

    Arrays are stored read-only; operations that change values build a new
    instance. Uniqueness of subject identifiers is enforced at ingestion
    (subsampling may legitimately repeat a subject and disambiguates ids).
    """

    name: str
    subjects: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise EmptyView(f"view {self.name!r}: expected a 2-d table")
        if values.shape[0] == 0:
            raise EmptyView(f"view {self.name!r} has no data rows")
        if not np.all(np.isfinite(values)):
            raise NonNumericCell(f"view {self.name!r} contains NaN or infinite entries")
        if len(self.subjects) != values.shape[0]:
            raise DuplicateSubjectInView(
                f"view {self.name!r}: {len(self.subjects)} ids for {values.shape[0]} rows"
            )
        object.__setattr__(self, "values", _readonly(values))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (values.shape[0],):
                raise DuplicateSubjectInView(
                    f"view {self.name!r}: label vector length {labels.shape} does not match rows"
                )
            if not np.all((labels == 0) | (labels == 1)):
                raise NonNumericCell(f"view {self.name!r}: labels must be 0 or 1")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MultiViewDataset:
    """Ordered views over a common region list.

    ``centered`` records whether column means have been removed; the flag
    exists so centering is applied exactly once per pipeline.
    """

    views: tuple[ViewMatrix, ...]
    regions: tuple[str, ...]
    centered: bool = False

    def __post_init__(self) -> None:
        if len(self.views) == 0:
            raise EmptyView("dataset needs at least one view")
        p = len(self.regions)
        for view in self.views:
            if view.values.shape[1] != p:
                raise MismatchedRegions(
                    f"view {view.name!r} has {view.values.shape[1]} columns, expected {p}"
                )

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def n_subjects(self) -> tuple[int, ...]:
        return tuple(v.n_subjects for v in self.views)

    def view(self, m: int) -> ViewMatrix:
        if not 0 <= m < len(self.views):
            raise ViewIndexOutOfRange(f"view index {m} outside 0..{len(self.views) - 1}")
        return self.views[m]


def parse_manifest(path: str | Path) -> list[tuple[str, Path]]:
    """Read a manifest into ordered (view name, file path) pairs."""
    path = Path(path)
    if not path.is_file():
        raise ConfigParseError(f"manifest file not found: {path}")
    pairs: list[tuple[str, Path]] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigParseError(f"{path}:{lineno}: expected 'name = path'")
        name, _, target = line.partition("=")
        name = name.strip()
        target = target.strip()
        if not name or not target:
            raise ConfigParseError(f"{path}:{lineno}: empty view name or path")
        if name in seen:
            raise ConfigParseError(f"{path}:{lineno}: duplicate view name {name!r}")
        seen.add(name)
        view_path = Path(target)
        if not view_path.is_absolute():
            view_path = path.parent / view_path
        pairs.append((name, view_path))
    if not pairs:
        raise ConfigParseError(f"manifest {path} lists no views")
    return pairs


def load_view_csv(path: str | Path, name: str) -> tuple[tuple[str, ...], ViewMatrix]:
    """Parse one view file; returns its region list and the matrix."""
    path = Path(path)
    if not path.is_file():
        raise ConfigParseError(f"view file not found: {path}")
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyView(f"view {name!r}: {path} is empty") from None
        header = [cell.strip() for cell in header]
        if not header or header[0] != ID_COLUMN:
            raise MismatchedRegions(
                f"view {name!r}: first header column must be {ID_COLUMN!r}"
            )
        has_labels = len(header) > 1 and header[-1] == LABEL_COLUMN
        regions = tuple(header[1:-1] if has_labels else header[1:])
        if not regions:
            raise MismatchedRegions(f"view {name!r}: no region columns in header")
        n_cells = 1 + len(regions) + (1 if has_labels else 0)

        subjects: list[str] = []
        rows: list[list[float]] = []
        labels: list[int] = []
        seen: dict[str, int] = {}
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != n_cells:
                raise NonNumericCell(
                    f"view {name!r}: row {lineno} has {len(cells)} cells, expected {n_cells}"
                )
            subject = cells[0].strip()
            if subject in seen:
                raise DuplicateSubjectInView(
                    f"view {name!r}: subject {subject!r} appears on rows "
                    f"{seen[subject]} and {lineno}"
                )
            seen[subject] = lineno
            subjects.append(subject)
            row = []
            for j, cell in enumerate(cells[1 : 1 + len(regions)]):
                try:
                    value = float(cell)
                except ValueError:
                    raise NonNumericCell(
                        f"view {name!r}: row {lineno}, region {regions[j]!r}: "
                        f"cannot parse {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise NonNumericCell(
                        f"view {name!r}: row {lineno}, region {regions[j]!r}: "
                        f"non-finite value {cell!r}"
                    )
                row.append(value)
            rows.append(row)
            if has_labels:
                cell = cells[-1].strip()
                if cell not in ("0", "1"):
                    raise NonNumericCell(
                        f"view {name!r}: row {lineno}: label must be 0 or 1, got {cell!r}"
                    )
                labels.append(int(cell))

    if len(rows) < 2:
        raise EmptyView(f"view {name!r}: needs at least two subject rows, got {len(rows)}")
    matrix = ViewMatrix(
        name=name,
        subjects=tuple(subjects),
        values=np.asarray(rows, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64) if has_labels else None,
    )
    return regions, matrix


def load_views(manifest: str | Path) -> MultiViewDataset:
    """Load every view listed in a manifest into one (uncentered) dataset.

    The first view's header fixes the region list; later views must match
    it exactly, names and order both.
    """
    pairs = parse_manifest(manifest)
    regions: tuple[str, ...] | None = None
    views: list[ViewMatrix] = []
    for name, view_path in pairs:
        view_regions, view = load_view_csv(view_path, name)
        if regions is None:
            regions = view_regions
        elif view_regions != regions:
            raise MismatchedRegions(
                f"view {name!r}: region columns disagree with view {views[0].name!r}"
            )
        views.append(view)
    assert regions is not None
    return MultiViewDataset(views=tuple(views), regions=regions, centered=False)


def center_columns(ds: MultiViewDataset) -> MultiViewDataset:
    """Subtract per-view column means; errors if already applied."""
    if ds.centered:
        raise AlreadyCentered("dataset columns were already centered")
    views = tuple(
        replace(view, values=view.values - view.values.mean(axis=0, keepdims=True))
        for view in ds.views
    )
    return MultiViewDataset(views=views, regions=ds.regions, centered=True)


def scaled_view(ds: MultiViewDataset, m: int) -> np.ndarray:
    """View m divided by the square root of its subject count.

    The trace of the scaled view's gram matrix then equals the view's total
    sample variance (divisor n, not n-1). Requires a centered dataset.
    """
    view = ds.view(m)
    if not ds.centered:
        raise ValueError("scaled_view requires a centered dataset")
    return view.values / math.sqrt(view.n_subjects)


def total_sample_variance(ds: MultiViewDataset, m: int) -> float:
    """Sum over regions of the per-region sample variance of view m."""
    a = scaled_view(ds, m)
    return float(np.sum(a * a))
