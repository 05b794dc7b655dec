"""
SVG charts rendered with matplotlib.

Output is byte-deterministic: the SVG id salt is fixed, no date metadata is
written and text is kept as text. Each bar is grouped under id "bar-<i>" and
each heatmap cell under "cell-<row>-<col>".
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from ..errors import InvalidInputError  # noqa: E402

BAR_COLOR = "#4c72b0"
CELL_COLOR = "#c44e52"
SVG_STYLE = {"svg.hashsalt": "armorbench", "svg.fonttype": "none", "font.family": "DejaVu Sans"}


def _save_svg(fig, path):
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_bar_chart(series, path, title="", ylabel="", ylim=None):
    """
    Bar chart of labelled values.

    series is a sequence of (label, value) pairs or a dict; bars start at 0 so
    their heights are proportional to the values.
    """
    items = list(series.items()) if isinstance(series, dict) else list(series)
    if not items:
        raise InvalidInputError("bar chart needs at least one value")
    labels = [str(label) for label, _ in items]
    values = [float(value) for _, value in items]

    with plt.rc_context(SVG_STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(items) + 1.5), 4.0))
        bars = ax.bar(range(len(values)), values, color=BAR_COLOR)
        for i, bar in enumerate(bars):
            bar.set_gid(f"bar-{i}")
        ax.set_xticks(range(len(values)))
        ax.set_xticklabels(labels, rotation=30, ha="right")
        if ylim is not None:
            ax.set_ylim(*ylim)
        ax.set_title(title)
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        _save_svg(fig, path)


def render_confusion_heatmap(confusion, path, class_names=None, title=""):
    """
    Confusion matrix heatmap; cell opacity is count / max count.

    An all-zero matrix renders every cell at opacity 0.
    """
    counts = np.asarray(getattr(confusion, "counts", confusion), dtype=np.int64)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or counts.size == 0:
        raise InvalidInputError(f"heatmap needs a nonempty square matrix, got shape {counts.shape}")
    k = counts.shape[0]
    peak = counts.max()
    names = list(class_names) if class_names is not None else [str(i) for i in range(k)]

    with plt.rc_context(SVG_STYLE):
        size = max(4.0, 0.5 * k + 2.0)
        fig, ax = plt.subplots(figsize=(size, size))
        for r in range(k):
            for c in range(k):
                opacity = float(counts[r, c]) / float(peak) if peak > 0 else 0.0
                cell = Rectangle((c, r), 1.0, 1.0, facecolor=CELL_COLOR, alpha=opacity, linewidth=0)
                cell.set_gid(f"cell-{r}-{c}")
                ax.add_patch(cell)
                ax.text(c + 0.5, r + 0.5, str(counts[r, c]), ha="center", va="center", fontsize=7)
        ax.set_xlim(0, k)
        ax.set_ylim(k, 0)
        ax.set_xticks(np.arange(k) + 0.5)
        ax.set_yticks(np.arange(k) + 0.5)
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
        ax.set_yticklabels(names, fontsize=7)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        ax.set_title(title)
        fig.tight_layout()
        _save_svg(fig, path)
