"""Delimited report artifacts and the provenance record.

Everything numeric is written as decimal text at 17 significant digits,
which round-trips IEEE doubles exactly, and rows always end in a bare
newline; identical inputs therefore give byte-identical files.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .analysis import LdaSummary, ProjectionSet
from .factor_model import VarianceReport
from .model_selection import RankCandidate
from .solver import FitTrace
from .stability import StabilityReport, rank_regions


def format_float(x: float) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return "%.17g" % x


def _write_rows(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_files(paths) -> str:
    """One digest over several files in order; changing any byte changes it."""
    digest = hashlib.sha256()
    for path in paths:
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def write_trace_csv(trace: FitTrace, path: Path) -> None:
    rows = [
        [str(i), format_float(obj), format_float(viol)]
        for i, (obj, viol) in enumerate(zip(trace.objective, trace.max_violation))
    ]
    _write_rows(path, ["iteration", "objective", "max_violation"], rows)


def write_variance_views_csv(
    report: VarianceReport, view_names: tuple[str, ...], path: Path
) -> None:
    rows = []
    for m, name in enumerate(view_names):
        rows.append(
            [
                name,
                format_float(report.total[m]),
                format_float(report.shared),
                format_float(report.specific[m]),
                format_float(report.shared_fraction[m]),
                format_float(report.specific_fraction[m]),
                format_float(bool(report.flagged[m])),
            ]
        )
    _write_rows(
        path,
        ["view", "total", "shared", "specific", "shared_frac", "specific_frac", "flagged"],
        rows,
    )


def write_variance_regions_csv(
    report: VarianceReport,
    regions: tuple[str, ...],
    view_names: tuple[str, ...],
    path: Path,
) -> None:
    header = ["region", "shared"] + [f"specific_{name}" for name in view_names]
    rows = []
    for j, region in enumerate(regions):
        row = [region, format_float(report.shared_by_region[j])]
        row.extend(format_float(report.specific_by_region[m][j]) for m in range(len(view_names)))
        rows.append(row)
    _write_rows(path, header, rows)


def write_rank_table_csv(
    rows_in: list[RankCandidate], view_names: tuple[str, ...], path: Path
) -> None:
    header = ["d"]
    for name in view_names:
        header += [f"shared_frac_{name}", f"specific_frac_{name}"]
    header.append("qualifying")
    rows = []
    for cand in rows_in:
        row = [str(cand.shared_rank)]
        for m in range(len(view_names)):
            row += [
                format_float(cand.shared_fraction[m]),
                format_float(cand.specific_fraction[m]),
            ]
        row.append(format_float(cand.qualifying))
        rows.append(row)
    _write_rows(path, header, rows)


def write_stability_csv(report: StabilityReport, path: Path) -> None:
    rows = []
    for component in report.components:
        c = report.component_index(component)
        for rank, j in enumerate(rank_regions(report, component), start=1):
            rows.append(
                [
                    component,
                    report.regions[j],
                    format_float(report.sp[c, j]),
                    str(rank),
                    format_float(report.mean_abs_loading[c, j]),
                ]
            )
    _write_rows(path, ["component", "region", "sp", "rank", "mean_abs_loading"], rows)


def write_ppj_csv(pset: ProjectionSet, m: int, path: Path) -> None:
    header = ["subject_id", *pset.axis_labels, "label"]
    labels = pset.labels[m]
    rows = []
    for i, subject in enumerate(pset.subjects[m]):
        row = [subject]
        row.extend(format_float(x) for x in pset.coordinates[m][i])
        row.append("" if labels is None else str(int(labels[i])))
        rows.append(row)
    _write_rows(path, header, rows)


def write_lda_csv(summary: LdaSummary, path: Path) -> None:
    header = [
        "w_x",
        "w_y",
        "offset",
        "accuracy",
        "drawn",
        "pct_class0_side0",
        "pct_class0_side1",
        "pct_class1_side0",
        "pct_class1_side1",
    ]
    row = [
        format_float(summary.normal[0]),
        format_float(summary.normal[1]),
        format_float(summary.offset),
        format_float(summary.accuracy),
        format_float(summary.drawn),
        format_float(summary.side_percentages[0, 0]),
        format_float(summary.side_percentages[0, 1]),
        format_float(summary.side_percentages[1, 0]),
        format_float(summary.side_percentages[1, 1]),
    ]
    _write_rows(path, header, [row])


def write_projection_summary_csv(
    pset: ProjectionSet, view_names: tuple[str, ...], path: Path
) -> None:
    rows = []
    for m, name in enumerate(view_names):
        relative = (
            pset.residual_norm[m] / pset.data_norm[m] if pset.data_norm[m] > 0 else 0.0
        )
        rows.append(
            [
                name,
                format_float(pset.residual_norm[m]),
                format_float(pset.data_norm[m]),
                format_float(relative),
            ]
        )
    _write_rows(path, ["view", "residual_norm", "data_norm", "relative_residual"], rows)


def write_view_csv(
    path: Path,
    subjects: tuple[str, ...],
    regions: tuple[str, ...],
    values: np.ndarray,
    labels: np.ndarray | None,
) -> None:
    """Dataset-format view file; the loader reads these back verbatim."""
    header = ["subject_id", *regions] + (["label"] if labels is not None else [])
    rows = []
    for i, subject in enumerate(subjects):
        row = [subject]
        row.extend(format_float(x) for x in values[i])
        if labels is not None:
            row.append(str(int(labels[i])))
        rows.append(row)
    _write_rows(path, header, rows)


def write_provenance(path: Path, entries: dict[str, str]) -> None:
    """Sorted key-value record of everything that determined the run.

    Deliberately excludes wall-clock time and execution-only settings such
    as the worker count, which by construction do not change results.
    """
    lines = [f"{key} = {entries[key]}" for key in sorted(entries)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
