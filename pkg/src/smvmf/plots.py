"""Figure rendering for the command line report paths.

Each command that writes delimited output also renders one figure next to
it. Everything goes through the Agg backend straight to PNG; no display
is ever required.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import LdaSummary
from .model_selection import RankCandidate
from .solver import FitTrace
from .stability import StabilityReport, rank_regions

_DPI = 150


def save_trace_plot(trace: FitTrace, path: Path) -> None:
    fig, (ax_obj, ax_viol) = plt.subplots(1, 2, figsize=(9, 3.4))
    iterations = np.arange(len(trace.objective))
    ax_obj.plot(iterations, trace.objective, marker=".", color="tab:blue")
    ax_obj.set_xlabel("iteration")
    ax_obj.set_ylabel("objective")
    ax_obj.set_title("objective")
    positive = trace.max_violation[trace.max_violation > 0]
    ax_viol.plot(iterations, trace.max_violation, marker=".", color="tab:red")
    if positive.size:
        ax_viol.set_yscale("log")
    ax_viol.set_xlabel("iteration")
    ax_viol.set_ylabel("max constraint violation")
    ax_viol.set_title("orthogonality drift")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_rank_plot(
    rows: list[RankCandidate],
    view_names: tuple[str, ...],
    threshold: float,
    path: Path,
) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.8))
    d_values = [row.shared_rank for row in rows]
    for m, name in enumerate(view_names):
        combined = [row.shared_fraction[m] + row.specific_fraction[m] for row in rows]
        ax.plot(d_values, combined, marker="o", label=name)
    ax.axhline(threshold, color="grey", linestyle="--", linewidth=1)
    ax.set_xlabel("shared rank")
    ax.set_ylabel("shared + specific variance fraction")
    ax.set_ylim(0, max(1.05, ax.get_ylim()[1]))
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_stability_plot(report: StabilityReport, path: Path, top: int = 12) -> None:
    n = len(report.components)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.4), squeeze=False)
    for c, component in enumerate(report.components):
        ax = axes[0][c]
        order = rank_regions(report, component)[:top]
        names = [report.regions[j] for j in order]
        values = [report.sp[c, j] for j in order]
        ax.barh(range(len(order)), values, color="tab:blue")
        ax.set_yticks(range(len(order)))
        ax.set_yticklabels(names, fontsize=7)
        ax.invert_yaxis()
        ax.set_xlim(0, 1)
        ax.set_xlabel("selection probability")
        ax.set_title(component, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_projection_plot(
    coords: np.ndarray,
    labels: np.ndarray | None,
    summary: LdaSummary | None,
    axis_names: tuple[str, str],
    title: str,
    path: Path,
) -> None:
    """Scatter of the first two specific coordinates, boundary included
    only when the discriminant beats the majority-class guess."""
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    if labels is None:
        ax.scatter(coords[:, 0], coords[:, 1], s=18, color="tab:grey")
    else:
        for value, colour, marker in ((0, "tab:blue", "o"), (1, "tab:red", "^")):
            mask = labels == value
            ax.scatter(
                coords[mask, 0],
                coords[mask, 1],
                s=20,
                color=colour,
                marker=marker,
                label=f"class {value}",
            )
        ax.legend(fontsize=8)
    if summary is not None and summary.drawn:
        # line normal . x = offset, clipped to the data box
        x_lo, x_hi = ax.get_xlim()
        y_lo, y_hi = ax.get_ylim()
        wx, wy = summary.normal
        if abs(wy) > abs(wx):
            xs = np.linspace(x_lo, x_hi, 2)
            ys = (summary.offset - wx * xs) / wy
        else:
            ys = np.linspace(y_lo, y_hi, 2)
            xs = (summary.offset - wy * ys) / wx
        ax.plot(xs, ys, color="black", linewidth=1.2)
        ax.set_xlim(x_lo, x_hi)
        ax.set_ylim(y_lo, y_hi)
    ax.set_xlabel(axis_names[0])
    ax.set_ylabel(axis_names[1])
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_variance_plot(
    shared_fraction: np.ndarray,
    specific_fraction: np.ndarray,
    view_names: tuple[str, ...],
    path: Path,
) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    x = np.arange(len(view_names))
    ax.bar(x, shared_fraction, width=0.6, label="shared", color="tab:blue")
    ax.bar(
        x,
        specific_fraction,
        width=0.6,
        bottom=shared_fraction,
        label="specific",
        color="tab:orange",
    )
    ax.set_xticks(x)
    ax.set_xticklabels(view_names, fontsize=8)
    ax.set_ylabel("variance fraction")
    ax.axhline(1.0, color="grey", linewidth=0.8, linestyle=":")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
