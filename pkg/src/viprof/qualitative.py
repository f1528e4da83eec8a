"""Category-level analysis of posted images via final-layer class scores.

Each image is labeled with the argmax of its score vector over the category
universe (the bundled table names the standard 1000 ImageNet categories).
Group histograms, top-difference lists between two groups, and word-cloud
frequency tables are all computed from those labels. Only the argmax is used,
so pre- and post-softmax score conventions are interchangeable.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from .corpus import AgeRange, Corpus, Gender, Profile
from .errors import DataError
from .visfeat import EmbeddingStore, EmbeddingVector, SOFTMAX_LAYER


def load_category_names() -> tuple[str, ...]:
    """The bundled ImageNet-1k category name table, index-aligned."""
    text = resources.files("viprof.data").joinpath("imagenet_categories.txt").read_text("utf-8")
    names = tuple(line for line in text.splitlines() if line)
    if len(names) != 1000:
        raise DataError(f"category table must have 1000 names, found {len(names)}")
    return names


def category_name(index: int, names: tuple[str, ...] | None) -> str:
    if names is not None and 0 <= index < len(names):
        return names[index]
    return f"category_{index}"


def label_image(scores: EmbeddingVector | np.ndarray) -> int:
    """Argmax category id; ties resolve to the lowest index."""
    if isinstance(scores, EmbeddingVector):
        if scores.layer != SOFTMAX_LAYER:
            raise DataError(f"expected {SOFTMAX_LAYER} scores, got layer {scores.layer!r}")
        values = scores.values
    else:
        values = np.asarray(scores)
    if values.ndim != 1 or len(values) == 0:
        raise DataError("score vector must be a non-empty flat vector")
    if not np.all(np.isfinite(values)):
        raise DataError("score vector contains non-finite values")
    return int(np.argmax(values))


@dataclass(frozen=True)
class CategoryHistogram:
    """Normalized distribution of argmax category labels over one group."""

    group: str
    counts: np.ndarray  # integer counts per category id

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or len(counts) == 0:
            raise DataError("histogram counts must be a non-empty flat vector")
        if np.any(counts < 0):
            raise DataError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def universe(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        total = self.total
        if total == 0:
            return np.zeros(self.universe, dtype=np.float64)
        return self.counts / total

    def to_json_dict(self, names: tuple[str, ...] | None = None) -> dict:
        freqs = self.frequencies
        nonzero = np.nonzero(self.counts)[0]
        return {
            "group": self.group,
            "universe": self.universe,
            "total": self.total,
            "categories": [
                {
                    "id": int(i),
                    "name": category_name(int(i), names),
                    "count": int(self.counts[i]),
                    "frequency": float(freqs[i]),
                }
                for i in nonzero
            ],
        }


GroupSelector = Callable[[Profile], bool]


def by_gender(label: str) -> GroupSelector:
    gender = Gender.parse(label)
    return lambda p: p.gender is gender


def by_age(label: str) -> GroupSelector:
    age = AgeRange.parse(label)
    return lambda p: p.age is age


def group_histogram(
    corpus: Corpus, store: EmbeddingStore, selector: GroupSelector,
    group: str = "group",
) -> CategoryHistogram:
    """Histogram of argmax labels over all usable images of matching profiles."""
    universe = store.dim(SOFTMAX_LAYER)
    if universe is None:
        raise DataError("embedding store has no final-layer score vectors")
    counts = np.zeros(universe, dtype=np.int64)
    labeled = 0
    for profile in corpus.profiles.values():
        if not selector(profile):
            continue
        for image_id in profile.images:
            scores = store.get(image_id, SOFTMAX_LAYER)
            if scores is None:
                continue
            counts[label_image(scores)] += 1
            labeled += 1
    if labeled == 0:
        raise DataError(f"group {group!r} has no images with score vectors")
    return CategoryHistogram(group=group, counts=counts)


@dataclass(frozen=True)
class DifferenceList:
    """Categories most over-represented in each of two groups.

    Entries are (category_id, name, signed frequency difference), ordered by
    absolute difference descending within each side; ties by category id.
    """

    group_a: str
    group_b: str
    favors_a: tuple[tuple[int, str, float], ...]
    favors_b: tuple[tuple[int, str, float], ...]
    n_per_side: int
    warning: str | None = None

    def to_json_dict(self) -> dict:
        def rows(entries):
            return [{"id": i, "name": name, "difference": d} for i, name, d in entries]
        out = {
            "group_a": self.group_a, "group_b": self.group_b,
            "n_per_side": self.n_per_side,
            "favors_a": rows(self.favors_a), "favors_b": rows(self.favors_b),
        }
        if self.warning:
            out["warning"] = self.warning
        return out

    def to_markdown(self) -> str:
        lines = [
            f"| favors {self.group_a} | diff | favors {self.group_b} | diff |",
            "|---|---|---|---|",
        ]
        for i in range(max(len(self.favors_a), len(self.favors_b))):
            a = self.favors_a[i] if i < len(self.favors_a) else ("", "", None)
            b = self.favors_b[i] if i < len(self.favors_b) else ("", "", None)
            a_diff = f"+{a[2]:.4f}" if a[2] is not None else ""
            b_diff = f"{b[2]:.4f}" if b[2] is not None else ""
            lines.append(f"| {a[1]} | {a_diff} | {b[1]} | {b_diff} |")
        return "\n".join(lines) + "\n"


def difference_list(
    h_a: CategoryHistogram, h_b: CategoryHistogram, n: int,
    names: tuple[str, ...] | None = None,
) -> DifferenceList:
    """Top n/2 categories per side by normalized-frequency difference."""
    if n % 2 != 0 or n < 2:
        raise DataError(f"difference list size must be a positive even number, got {n}")
    if h_a.universe != h_b.universe:
        raise DataError(
            f"histograms use different category universes: {h_a.universe} vs {h_b.universe}"
        )
    diff = h_a.frequencies - h_b.frequencies
    half = n // 2

    positive = sorted((i for i in range(len(diff)) if diff[i] > 0),
                      key=lambda i: (-diff[i], i))[:half]
    negative = sorted((i for i in range(len(diff)) if diff[i] < 0),
                      key=lambda i: (-abs(diff[i]), i))[:half]

    warning = None
    if len(positive) < half or len(negative) < half:
        warning = (
            f"only {len(positive)} categories favor {h_a.group} and "
            f"{len(negative)} favor {h_b.group}; requested {half} per side"
        )

    return DifferenceList(
        group_a=h_a.group, group_b=h_b.group,
        favors_a=tuple((i, category_name(i, names), float(diff[i])) for i in positive),
        favors_b=tuple((i, category_name(i, names), float(diff[i])) for i in negative),
        n_per_side=half, warning=warning,
    )


def export_cloud(
    histogram: CategoryHistogram, out: str | Path | None = None,
    names: tuple[str, ...] | None = None,
) -> list[tuple[str, float]]:
    """(name, frequency) rows sorted by frequency descending, ties by id,
    as CSV input for any external word-cloud renderer. Zero rows are dropped."""
    freqs = histogram.frequencies
    order = sorted(np.nonzero(histogram.counts)[0], key=lambda i: (-freqs[i], i))
    rows = [(category_name(int(i), names), float(freqs[i])) for i in order]
    if out is not None:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["category", "frequency"])
        writer.writerows(rows)
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(buf.getvalue(), encoding="utf-8")
    return rows
