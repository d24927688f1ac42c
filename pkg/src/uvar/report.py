"""Figure rendering for completed simulation runs.

Reads the delimited outputs of ``uvar simulate`` and renders summary
figures next to them: the spread of per-replicate variance ratios by
method, and empirical coverage against the nominal level. Figures are a
convenience view; the delimited files remain the canonical output.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError

__all__ = ["render_report"]

_METHOD_LABELS = {
    "asy": "asymptotic",
    "hd": "H-decomposition",
    "ij": "infinitesimal jackknife (BM)",
    "empirical": "empirical",
}
_METHOD_COLORS = {"asy": "#d95f02", "hd": "#1b9e77", "ij": "#7570b3", "empirical": "#666666"}


def _read_rows(path: Path) -> list:
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def render_report(input_dir, output_dir=None) -> list:
    """Render figures for one simulate output directory; returns paths."""
    input_dir = Path(input_dir)
    output_dir = Path(output_dir) if output_dir else input_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    replicate_rows = _read_rows(input_dir / "replicates.csv")
    summary_rows = _read_rows(input_dir / "summary.csv")

    v_emp = None
    for row in summary_rows:
        if row["method"] == "empirical" and row["metric"] == "v_emp":
            v_emp = float(row["value"])
    if v_emp is None:
        raise DataError("summary.csv lacks the empirical variance row")

    written = []
    ratios = {}
    for method, column in (("asy", "v_asy"), ("hd", "v_hd"), ("ij", "v_ij")):
        values = [
            float(row[column])
            for row in replicate_rows
            if row[column] != "" and row["skipped_reason"] == ""
        ]
        if values and v_emp > 0:
            ratios[method] = np.asarray(values) / v_emp

    if ratios:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        labels = list(ratios)
        parts = ax.violinplot(
            [np.clip(ratios[m], 0, np.quantile(ratios[m], 0.95)) for m in labels],
            showmedians=True,
        )
        for body, method in zip(parts["bodies"], labels):
            body.set_facecolor(_METHOD_COLORS[method])
            body.set_alpha(0.6)
        ax.axhline(1.0, color="black", linewidth=0.8, linestyle="--")
        ax.set_xticks(range(1, len(labels) + 1))
        ax.set_xticklabels([_METHOD_LABELS[m] for m in labels])
        ax.set_ylabel("variance ratio (estimate / empirical)")
        ax.set_title("Variance ratios by method (truncated at the 95% quantile)")
        fig.tight_layout()
        path = output_dir / "fig_variance_ratios.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    coverage = {}
    for row in summary_rows:
        if row["metric"] == "coverage":
            coverage.setdefault(row["method"], []).append(
                (float(row["alpha"]), float(row["value"]))
            )
    if coverage:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for method, points in coverage.items():
            points.sort()
            alphas = [a for a, _ in points]
            values = [v for _, v in points]
            ax.plot(
                alphas,
                values,
                marker="o",
                label=_METHOD_LABELS.get(method, method),
                color=_METHOD_COLORS.get(method),
            )
        lo = min(a for pts in coverage.values() for a, _ in pts)
        hi = max(a for pts in coverage.values() for a, _ in pts)
        ax.plot([lo, hi], [lo, hi], color="black", linewidth=0.8, linestyle="--", label="nominal")
        ax.set_xlabel("nominal level")
        ax.set_ylabel("empirical coverage")
        ax.set_title("Interval coverage by method")
        ax.legend()
        fig.tight_layout()
        path = output_dir / "fig_coverage.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
