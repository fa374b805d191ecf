"""Report figures written next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from melaseg.evaluation import METRICS, EvalReport  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_segmentation_metrics(report: EvalReport, path) -> Path:
    """Per-image metric distributions as box plots with jittered points."""
    table = np.array([it.metrics.values() for it in report.items]).reshape(-1, len(METRICS))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.2))
        if len(table):
            ax.boxplot([table[:, k] for k in range(len(METRICS))], widths=0.5, showfliers=False)
            rng = np.random.default_rng(0)
            for k in range(len(METRICS)):
                x = k + 1 + rng.uniform(-0.12, 0.12, len(table))
                ax.plot(x, table[:, k], ".", color="0.35", ms=3, alpha=0.7)
        ax.set_xticks(range(1, len(METRICS) + 1), METRICS)
        ax.set_ylim(-0.02, 1.02)
        ax.set_ylabel("per-image value")
        ax.set_title(f"Segmentation metrics, {len(report.items)} images")
        return _save(fig, path)


def plot_classification_metrics(report: EvalReport, path) -> Path:
    """Grouped bars of the five metrics for each one-vs-rest task."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.2))
        width = 0.8 / max(1, len(report.items))
        x = np.arange(len(METRICS))
        for k, it in enumerate(report.items):
            ax.bar(x + k * width, it.metrics.values(), width, label=it.item.replace("_", " "))
        ax.set_xticks(x + width * (len(report.items) - 1) / 2, METRICS)
        ax.set_ylim(0, 1.05)
        acc = report.extra.get("three_class_accuracy")
        title = "One-vs-rest task metrics"
        if acc is not None:
            title += f" (3-class accuracy {acc:.3f})"
        ax.set_title(title)
        ax.legend(frameon=False, loc="lower right")
        return _save(fig, path)


def plot_overlay(img: np.ndarray, mask: np.ndarray, path, truth: np.ndarray | None = None) -> Path:
    """Image with the predicted boundary (and the truth boundary if given)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.imshow(img)
        ax.contour(mask.astype(float), levels=[0.5], colors=["yellow"], linewidths=1)
        if truth is not None:
            ax.contour(truth.astype(float), levels=[0.5], colors=["cyan"], linewidths=1, linestyles="--")
        ax.set_axis_off()
        return _save(fig, path)


def plot_report(report: EvalReport, path) -> Path:
    if report.kind == "segmentation":
        return plot_segmentation_metrics(report, path)
    return plot_classification_metrics(report, path)
