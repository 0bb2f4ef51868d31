"""Figure and table rendering for the CLI report paths.

Figures go to PNG files next to the delimited output; nothing is shown
interactively.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .ppds import Trace
from .raster import MultiBandImage

METRIC_FIELDS = ("rmse", "sam", "mssim", "cc")


def preview_array(img: MultiBandImage) -> np.ndarray:
    """First min(3, B) bands clipped to [0, 1] as an (H, W, 3) array."""
    planes = [np.clip(img.band_image(b), 0.0, 1.0) for b in range(min(3, img.bands))]
    while len(planes) < 3:
        planes.append(planes[-1])
    return np.stack(planes, axis=-1)


def save_trace_figure(trace: Trace, path, title: str = "solver trace") -> None:
    """Relative change, objective, and worst residual against iteration."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.semilogy(trace.iters, np.maximum(trace.rel_change, 1e-300),
                label="relative change")
    if trace.objective:
        scale = max(abs(v) for v in trace.objective) or 1.0
        ax.semilogy(trace.iters, [max(v / scale, 1e-300) for v in trace.objective],
                    label="objective (scaled)")
    if trace.residuals:
        worst = [max(max(r), 0.0) + 1e-300 for r in trace.residuals]
        ax.semilogy(trace.iters, worst, label="worst violation")
    ax.set_xlabel("iteration")
    ax.set_title(title)
    ax.legend(loc="best")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_comparison_figure(panels: list[tuple[str, MultiBandImage]], path,
                           title: str = "") -> None:
    """One row of image previews with labels."""
    n = len(panels)
    fig, axes = plt.subplots(1, n, figsize=(2.6 * n, 3.0))
    if n == 1:
        axes = [axes]
    for ax, (label, img) in zip(axes, panels):
        ax.imshow(preview_array(img), interpolation="nearest")
        ax.set_title(label, fontsize=9)
        ax.set_axis_off()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def write_metrics_csv(path, rows: list[dict]) -> None:
    """Delimited metrics table; one row per variant or baseline."""
    fields = ["name"] + list(METRIC_FIELDS) + ["converged", "iterations"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in fields})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def format_metrics_table(rows: list[dict]) -> str:
    """Fixed-precision text table for stdout."""
    header = f"{'name':<18}" + "".join(f"{m:>10}" for m in METRIC_FIELDS)
    lines = [header, "-" * len(header)]
    for row in rows:
        cells = "".join(f"{row[m]:>10.4f}" for m in METRIC_FIELDS)
        lines.append(f"{row['name']:<18}" + cells)
    return "\n".join(lines)
