"""Figure rendering for experiment reports.

Experiment runners emit machine-readable tables; these helpers render
the same grids as PNG figures next to the delimited output: a line
chart of accuracy against cluster count for the sweep, and a grouped
bar chart for the method comparison.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _cell_accuracy(cell) -> float | None:
    if isinstance(cell, dict):
        return cell.get("accuracy")
    return cell


def render_sweep_figure(result: dict, path: str | Path) -> None:
    ks = result["ks"]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for name in result["classifiers"]:
        cells = result["accuracy"][name]
        accs = [_cell_accuracy(cells.get(str(k))) for k in ks]
        xs = [k for k, a in zip(ks, accs) if a is not None]
        ys = [a for a in accs if a is not None]
        ax.plot(xs, ys, marker="o", label=name)
    ax.set_xlabel("cluster count")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.set_xticks(list(ks))
    ax.grid(True, alpha=0.3)
    ax.legend()
    ax.set_title("Keypoint-histogram accuracy vs. codebook size")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_comparison_figure(result: dict, path: str | Path) -> None:
    methods = result["methods"]
    families = result["families"]
    run = result["runs"][0]["accuracy"]  # first seed drives the figure
    width = 0.8 / len(families)
    xs = np.arange(len(methods))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for fi, family in enumerate(families):
        heights = []
        for method in methods:
            cell = run[method][family]
            heights.append(cell.get("accuracy", 0.0) if isinstance(cell, dict) else 0.0)
        ax.bar(xs + fi * width, heights, width=width, label=family)
    counts = result.get("feature_counts", {})
    labels = [f"{m}\n({counts[m]} feats)" if m in counts else m for m in methods]
    ax.set_xticks(xs + width * (len(families) - 1) / 2)
    ax.set_xticklabels(labels)
    ax.set_ylabel("test accuracy (best config per family)")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()
    ax.set_title("Feature methods across classifier families")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def sweep_to_csv(result: dict, path: str | Path) -> None:
    """Delimited form of the sweep grid: one row per classifier, one column per k."""
    ks = result["ks"]
    with open(path, "w") as fh:
        fh.write("classifier," + ",".join(f"k={k}" for k in ks) + "\n")
        for name in result["classifiers"]:
            row = [name]
            for k in ks:
                acc = _cell_accuracy(result["accuracy"][name].get(str(k)))
                row.append("inapplicable" if acc is None else f"{acc:.6f}")
            fh.write(",".join(row) + "\n")


def comparison_to_csv(result: dict, path: str | Path) -> None:
    """Delimited comparison table: per seed, methods x families accuracies."""
    with open(path, "w") as fh:
        fh.write("seed,method,n_features,family,best_config,accuracy\n")
        counts = result.get("feature_counts", {})
        for run in result["runs"]:
            for method in result["methods"]:
                for family in result["families"]:
                    cell = run["accuracy"][method][family]
                    config = cell.get("config", "") if isinstance(cell, dict) else ""
                    acc = cell.get("accuracy") if isinstance(cell, dict) else None
                    acc_text = "inapplicable" if acc is None else f"{acc:.6f}"
                    fh.write(f"{run['seed']},{method},{counts.get(method, '')},"
                             f"{family},{config},{acc_text}\n")
