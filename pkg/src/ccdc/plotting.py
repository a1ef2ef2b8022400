"""Figures for the reproduced robustness table and see-saw traces."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLUMNS = ("R_G", "R_G_low_PPT", "R_WN", "R_WN_low_PPT")
LABELS = {"R_G": "generalized", "R_G_low_PPT": "generalized, PPT lower",
          "R_WN": "white noise", "R_WN_low_PPT": "white noise, PPT lower"}


def table_figure(rows: list[dict], path) -> None:
    """Grouped bars of computed values with reference values as markers."""
    names = [r["process"] for r in rows]
    x = np.arange(len(names))
    width = 0.8 / len(COLUMNS)
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(names)), 4))
    for j, col in enumerate(COLUMNS):
        comp = [r["cells"][col]["value"] for r in rows]
        ref = [r["cells"][col]["reference"] for r in rows]
        pos = x - 0.4 + width * (j + 0.5)
        ax.bar(pos, [np.nan if v is None else v for v in comp], width, label=LABELS[col])
        ax.scatter(pos, [np.nan if v is None else v for v in ref], marker="_", s=200,
                   color="black", zorder=3)
    ax.scatter([], [], marker="_", s=200, color="black", label="reference")
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    ax.set_ylabel("robustness")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def seesaw_figure(traces: list, path) -> None:
    """Robustness against iteration for a set of see-saw runs."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for tr in traces:
        ax.plot(range(1, len(tr.values) + 1), tr.values, marker="o", ms=3, label=tr.initial)
    ax.set_xlabel("iteration")
    ax.set_ylabel("robustness")
    if len(traces) <= 10 and any(tr.initial for tr in traces):
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
