"""Matplotlib renderings written next to the delimited report outputs.

Every figure goes to a PNG file; nothing is shown interactively, so the Agg
backend is forced before pyplot loads.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .corpus import StatsReport
from .evaluation import EvaluationReport
from .qualitative import DifferenceList, category_name


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def fold_accuracy_figure(report: EvaluationReport, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    accs = report.fold_accuracies
    ax.bar(range(len(accs)), accs, color="#4878a8")
    if report.mean_accuracy is not None:
        ax.axhline(report.mean_accuracy, color="#b04030", linestyle="--",
                   label=f"mean {report.mean_accuracy:.3f}")
        ax.legend(loc="lower right")
    ax.set_xlabel("fold")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"{report.method} — {report.task}")
    return _save(fig, Path(path))


def per_class_figure(report: EvaluationReport, path: str | Path) -> Path:
    classes = list(report.per_class)
    acc = [report.per_class[c]["accuracy"] for c in classes]
    base = [report.per_class[c]["baseline"] for c in classes]
    x = range(len(classes))
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar([i - 0.2 for i in x], acc, width=0.4, label="accuracy", color="#4878a8")
    ax.bar([i + 0.2 for i in x], base, width=0.4, label="class probability", color="#a8a098")
    ax.set_xticks(list(x))
    ax.set_xticklabels(classes, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title(f"{report.method} — {report.task} per class")
    return _save(fig, Path(path))


def report_figures(report: EvaluationReport, outdir: str | Path, stem: str) -> list[Path]:
    """All figures for one report (recursing into sections)."""
    outdir = Path(outdir)
    written = []
    if report.fold_accuracies:
        written.append(fold_accuracy_figure(report, outdir / f"{stem}_folds.png"))
    if report.per_class:
        written.append(per_class_figure(report, outdir / f"{stem}_classes.png"))
    for name, section in report.sections.items():
        written.extend(report_figures(section, outdir, f"{stem}_{name.replace(':', '_')}"))
    return written


def stats_figure(stats: StatsReport, path: str | Path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    for ax, group, title in ((axes[0], stats.by_age, "by age range"),
                             (axes[1], stats.by_gender, "by gender")):
        labels = list(group)
        means = [group[g].mean_by_profile or 0.0 for g in labels]
        stds = [group[g].std_by_profile or 0.0 for g in labels]
        ax.bar(range(len(labels)), means, yerr=stds, capsize=3, color="#4878a8")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=20, ha="right")
        ax.set_title(f"images per profile {title}")
    fig.suptitle(f"corpus {stats.language}")
    return _save(fig, Path(path))


def top_categories_figure(histogram, path: str | Path, names=None, n: int = 20) -> Path:
    """Horizontal bars for the most frequent categories of one group."""
    freqs = histogram.frequencies
    order = sorted(np.nonzero(histogram.counts)[0], key=lambda i: (-freqs[i], i))[:n]
    labels = [category_name(int(i), names) for i in order]
    values = [float(freqs[i]) for i in order]
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.3 * len(order))))
    ax.barh(range(len(order)), values, color="#4878a8")
    ax.set_yticks(range(len(order)))
    ax.set_yticklabels(labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("frequency")
    ax.set_title(f"top categories — {histogram.group}")
    return _save(fig, Path(path))


def difference_figure(diff: DifferenceList, path: str | Path) -> Path:
    """Diverging bars: one side per group, largest differences outward."""
    entries = list(diff.favors_a) + list(reversed(diff.favors_b))
    names = [name for _, name, _ in entries]
    values = [value for _, _, value in entries]
    colors = ["#4878a8" if v >= 0 else "#b04030" for v in values]
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.3 * len(entries))))
    ax.barh(range(len(entries)), values, color=colors)
    ax.set_yticks(range(len(entries)))
    ax.set_yticklabels(names, fontsize=8)
    ax.invert_yaxis()
    ax.axvline(0, color="black", linewidth=0.8)
    ax.set_xlabel(f"frequency difference ({diff.group_a} − {diff.group_b})")
    return _save(fig, Path(path))
