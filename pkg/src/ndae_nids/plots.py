"""Figure rendering for training logs and evaluation reports.

All figures go straight to files through the Agg backend, so headless runs
work and two identical runs produce identical PNG bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .dataset import AttackClass  # noqa: E402
from .metrics import METRIC_FIELDS, ConfusionMatrix, EvaluationReport  # noqa: E402

_CLASS_NAMES = [c.value for c in AttackClass]


def save_loss_curves(curves: dict[str, list[float]], path) -> None:
    """Per-epoch training-loss curves, one line per stage."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, values in curves.items():
        ax.plot(range(1, len(values) + 1), values, marker=".", label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_title("Training loss")
    if curves:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_confusion_heatmap(matrix: ConfusionMatrix, path) -> None:
    """Row-true / column-predicted heatmap with per-cell counts."""
    counts = matrix.counts
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(counts, cmap="Blues")
    ax.set_xticks(range(len(_CLASS_NAMES)), labels=_CLASS_NAMES)
    ax.set_yticks(range(len(_CLASS_NAMES)), labels=_CLASS_NAMES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title("Confusion matrix")
    threshold = counts.max() / 2 if counts.max() > 0 else 0
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            color = "white" if counts[i, j] > threshold else "black"
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center", color=color)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metric_bars(report: EvaluationReport, path) -> None:
    """Grouped per-class bars for the five metrics; undefined values are omitted."""
    class_rows = [r for r in report.rows if r.label != "Total"]
    x = np.arange(len(class_rows))
    width = 0.16
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for k, metric in enumerate(METRIC_FIELDS):
        heights = []
        positions = []
        for i, row in enumerate(class_rows):
            value = getattr(row.metrics, metric)
            if value is None:
                continue
            heights.append(value)
            positions.append(x[i] + (k - 2) * width)
        ax.bar(positions, heights, width, label=metric.replace("_", " "))
    ax.set_xticks(x, labels=[r.label for r in class_rows])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("value")
    ax.set_title("Per-class metrics (one-vs-rest)")
    ax.legend(ncols=len(METRIC_FIELDS), fontsize=8, loc="lower center")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
