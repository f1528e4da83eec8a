"""Fold planning, accuracy metrics, class baselines, and report rendering.

Folds are subject-independent: every profile lands in exactly one fold, and in
strict mode every fold must contain at least one profile of every class of the
stratification task. Reports carry integer supports alongside derived floats
so identities (overall accuracy as the baseline-weighted sum of per-class
accuracies) can be checked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus, TASKS
from .errors import DataError


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    task: str
    assignment: dict[str, int]
    warnings: tuple[str, ...] = ()

    def split(self, corpus: Corpus, fold: int) -> tuple[list[str], list[str]]:
        """(train_ids, test_ids) for one fold, in corpus order."""
        train, test = [], []
        for pid in corpus.profiles:
            (test if self.assignment[pid] == fold else train).append(pid)
        return train, test

    def to_json_dict(self) -> dict:
        return {
            "k": self.k, "seed": self.seed, "task": self.task,
            "assignment": dict(self.assignment),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FoldPlan":
        try:
            return cls(
                k=doc["k"], seed=doc["seed"], task=doc["task"],
                assignment={str(k): int(v) for k, v in doc["assignment"].items()},
                warnings=tuple(doc.get("warnings", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed fold plan: {exc}") from None


def make_folds(
    corpus: Corpus, k: int, task: str, seed: int,
    allow_missing_class: bool = False,
) -> FoldPlan:
    """Seeded shuffle within each class, then round-robin over folds.

    The round-robin offset carries across classes so fold sizes stay balanced.
    A class with fewer profiles than folds leaves some folds without it; that
    rejects the plan unless allow_missing_class is set.
    """
    if task not in TASKS:
        raise DataError(f"unknown task {task!r}")
    if k < 2:
        raise DataError(f"fold count must be >= 2, got {k}")
    if not corpus.profiles:
        raise DataError("cannot plan folds over an empty corpus")

    by_class: dict[str, list[str]] = {}
    for pid, profile in corpus.profiles.items():
        by_class.setdefault(profile.label(task), []).append(pid)

    warnings = []
    for label in sorted(by_class):
        short = len(by_class[label])
        if short < k:
            message = (
                f"class {label!r} has {short} profiles for {k} folds; "
                f"{k - short} folds will lack it"
            )
            if not allow_missing_class:
                raise DataError(message + " (pass allow_missing_class to accept)")
            warnings.append(message)

    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    offset = 0
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        rng.shuffle(ids)
        for j, pid in enumerate(ids):
            assignment[pid] = (j + offset) % k
        offset = (offset + len(ids)) % k

    return FoldPlan(k=k, seed=seed, task=task, assignment=assignment,
                    warnings=tuple(warnings))


def accuracy(predictions: Sequence[tuple[str, str]]) -> float:
    if not predictions:
        raise DataError("accuracy of an empty prediction list is undefined")
    correct = sum(1 for gold, pred in predictions if gold == pred)
    return correct / len(predictions)


def class_probability_baseline(labels: Sequence[str]) -> dict[str, float]:
    """Empirical class frequencies: the accuracy of label-prior guessing."""
    if not labels:
        raise DataError("class baseline of an empty instance list is undefined")
    total = len(labels)
    counts: dict[str, int] = {}
    for label in labels:
        counts[label] = counts.get(label, 0) + 1
    return {label: counts[label] / total for label in sorted(counts)}


@dataclass
class EvaluationReport:
    """Results of one method run; composite runs nest sub-reports in sections.

    per_class maps each gold class to integer support/correct counts plus the
    derived accuracy and class-probability baseline, so report identities can
    be re-derived exactly from the integers.
    """

    method: str
    task: str
    unit: str
    fold_accuracies: tuple[float, ...]
    mean_accuracy: float | None
    overall_accuracy: float | None
    per_class: dict[str, dict]
    counts: dict[str, int]
    config: dict
    sections: dict[str, "EvaluationReport"] = field(default_factory=dict)
    audit: dict | None = None

    def __post_init__(self) -> None:
        for acc in self.fold_accuracies:
            if not 0.0 <= acc <= 1.0:
                raise DataError(f"accuracy out of range: {acc}")
        if self.fold_accuracies:
            expected = sum(self.fold_accuracies) / len(self.fold_accuracies)
            if self.mean_accuracy != expected:
                raise DataError("mean_accuracy must be the mean of fold accuracies")

    def to_json_dict(self) -> dict:
        out: dict = {
            "method": self.method,
            "task": self.task,
            "unit": self.unit,
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "overall_accuracy": self.overall_accuracy,
            "per_class": self.per_class,
            "counts": self.counts,
            "config": self.config,
        }
        if self.sections:
            out["sections"] = {k: v.to_json_dict() for k, v in self.sections.items()}
        if self.audit is not None:
            out["audit"] = self.audit
        return out

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EvaluationReport":
        return cls(
            method=doc["method"], task=doc["task"], unit=doc["unit"],
            fold_accuracies=tuple(doc["fold_accuracies"]),
            mean_accuracy=doc["mean_accuracy"],
            overall_accuracy=doc["overall_accuracy"],
            per_class=doc["per_class"], counts=doc["counts"], config=doc["config"],
            sections={k: cls.from_json_dict(v) for k, v in doc.get("sections", {}).items()},
            audit=doc.get("audit"),
        )


def build_report(
    method: str, task: str, unit: str,
    fold_predictions: Sequence[Sequence[tuple[str, str]]],
    counts: dict[str, int], config: dict,
    sections: dict[str, EvaluationReport] | None = None,
    audit: dict | None = None,
) -> EvaluationReport:
    """Assemble a report from per-fold (gold, predicted) pairs.

    Folds without test instances contribute no fold accuracy but are counted.
    """
    nonempty = [list(p) for p in fold_predictions if p]
    fold_accs = tuple(accuracy(p) for p in nonempty)
    pooled = [pair for p in nonempty for pair in p]

    per_class: dict[str, dict] = {}
    if pooled:
        total = len(pooled)
        golds = sorted({gold for gold, _ in pooled})
        for cls in golds:
            support = sum(1 for gold, _ in pooled if gold == cls)
            correct = sum(1 for gold, pred in pooled if gold == cls and pred == cls)
            per_class[cls] = {
                "support": support,
                "correct": correct,
                "accuracy": correct / support,
                "baseline": support / total,
            }

    all_counts = dict(counts)
    all_counts["empty_folds"] = len(fold_predictions) - len(nonempty)
    all_counts["instances"] = len(pooled)

    return EvaluationReport(
        method=method, task=task, unit=unit,
        fold_accuracies=fold_accs,
        mean_accuracy=(sum(fold_accs) / len(fold_accs)) if fold_accs else None,
        overall_accuracy=accuracy(pooled) if pooled else None,
        per_class=per_class, counts=all_counts, config=config,
        sections=sections or {}, audit=audit,
    )


# --- rendering ----------------------------------------------------------------

def _fmt(value: float | None, digits: int = 3) -> str:
    return "—" if value is None else f"{value:.{digits}f}"


def _render_markdown_body(report: EvaluationReport, level: int) -> list[str]:
    head = "#" * level
    lines = [f"{head} {report.method} — {report.task} ({report.unit}-level)", ""]
    lines.append(f"- mean accuracy over folds: {_fmt(report.mean_accuracy)}")
    lines.append(f"- overall (pooled) accuracy: {_fmt(report.overall_accuracy)}")
    if report.fold_accuracies:
        folds = ", ".join(f"{a:.3f}" for a in report.fold_accuracies)
        lines.append(f"- per-fold: {folds}")
    noteworthy = {k: v for k, v in sorted(report.counts.items()) if v}
    if noteworthy:
        lines.append("- counts: " + ", ".join(f"{k}={v}" for k, v in noteworthy.items()))
    if report.per_class:
        lines += ["", "| class | accuracy [P*] |", "|---|---|"]
        for cls, row in report.per_class.items():
            lines.append(f"| {cls} | {row['accuracy']:.3f} [{row['baseline']:.3f}] |")
    lines.append("")
    for name, section in report.sections.items():
        lines.append(f"{head}# {name}")
        lines.append("")
        lines += _render_markdown_body(section, level + 2)
    return lines


def render_scenario_table(report: EvaluationReport) -> str:
    """Pivot an eval-scenarios composite into (a)/(b)/(c) column pairs."""
    variants = ("a", "b", "c")
    sources = ("tweeted", "retweeted")
    header = ["| evaluating |"]
    for variant in variants:
        for source in sources:
            header.append(f" ({variant}) {source} |")
    sep = "|---|" + "---|" * (len(variants) * len(sources))
    row = [f"| {report.task} |"]
    for variant in variants:
        for source in sources:
            section = report.sections.get(f"{variant}:{source}")
            row.append(f" {_fmt(section.overall_accuracy if section else None)} |")
    return "".join(header) + "\n" + sep + "\n" + "".join(row) + "\n"


def render_report(report: EvaluationReport, format: str = "json") -> str:
    from .util import dump_json

    if format == "json":
        return dump_json(report.to_json_dict())
    if format == "markdown":
        lines = _render_markdown_body(report, 2)
        if report.method.startswith("scenarios"):
            lines += ["", render_scenario_table(report)]
        return "\n".join(lines).rstrip() + "\n"
    raise DataError(f"unknown report format {format!r}")
