import json
from fractions import Fraction

import numpy as np
import pytest

from viprof.corpus import AgeRange
from viprof.errors import DataError
from viprof.evaluation import (
    EvaluationReport, FoldPlan, accuracy, build_report,
    class_probability_baseline, make_folds, render_report,
    render_scenario_table,
)

from conftest import make_corpus


def corpus_with_classes(class_sizes, task="gender"):
    """class_sizes: mapping label -> #profiles for the given task."""
    specs = []
    i = 0
    for label, size in class_sizes.items():
        for _ in range(size):
            spec = {"id": f"u{i:03d}"}
            if task == "gender":
                spec["gender"] = label
            else:
                spec["age"] = label
            specs.append(spec)
            i += 1
    return make_corpus(specs)


class TestMakeFolds:
    def test_balanced_two_class_ten_folds(self):
        corpus = corpus_with_classes({"female": 10, "male": 10})
        plan = make_folds(corpus, 10, "gender", seed=1)
        for fold in range(10):
            _, test_ids = plan.split(corpus, fold)
            labels = [corpus.profiles[p].gender.value for p in test_ids]
            assert sorted(labels) == ["female", "male"]

    def test_class_smaller_than_k_rejected_in_strict_mode(self):
        corpus = corpus_with_classes({"female": 5, "male": 12})
        with pytest.raises(DataError, match="female"):
            make_folds(corpus, 10, "gender", seed=1)

    def test_allow_missing_class(self):
        corpus = corpus_with_classes({"female": 5, "male": 12})
        plan = make_folds(corpus, 10, "gender", seed=1, allow_missing_class=True)
        assert plan.warnings
        assert set(plan.assignment) == set(corpus.profiles)

    def test_seed_determinism(self):
        corpus = corpus_with_classes({"female": 9, "male": 7})
        a = make_folds(corpus, 3, "gender", seed=42)
        b = make_folds(corpus, 3, "gender", seed=42)
        assert a == b
        c = make_folds(corpus, 3, "gender", seed=43)
        assert c.assignment != a.assignment

    def test_rejects_small_k_and_empty_corpus(self):
        corpus = corpus_with_classes({"female": 3, "male": 3})
        with pytest.raises(DataError):
            make_folds(corpus, 1, "gender", seed=0)
        empty = make_corpus([])
        with pytest.raises(DataError):
            make_folds(empty, 2, "gender", seed=0)

    def test_unknown_task(self):
        corpus = corpus_with_classes({"female": 4, "male": 4})
        with pytest.raises(DataError):
            make_folds(corpus, 2, "nationality", seed=0)

    def test_invariants_over_random_shapes(self):
        rng = np.random.default_rng(7)
        ages = [a.value for a in AgeRange]
        for trial in range(60):
            k = int(rng.integers(2, 8))
            sizes = {age: int(rng.integers(k, 3 * k)) for age in ages[: int(rng.integers(2, 6))]}
            corpus = corpus_with_classes(sizes, task="age")
            plan = make_folds(corpus, k, "age", seed=trial)
            # total, single-valued, covering
            assert set(plan.assignment) == set(corpus.profiles)
            assert all(0 <= f < k for f in plan.assignment.values())
            # each fold holds >= 1 profile of every class
            for fold in range(k):
                _, test_ids = plan.split(corpus, fold)
                labels = {corpus.profiles[p].age.value for p in test_ids}
                assert labels == set(sizes)
            # subject independence: folds partition the profiles
            seen = [pid for fold in range(k) for pid in plan.split(corpus, fold)[1]]
            assert sorted(seen) == sorted(corpus.profiles)

    def test_fold_sizes_balanced(self):
        corpus = corpus_with_classes({"female": 11, "male": 13})
        plan = make_folds(corpus, 4, "gender", seed=0)
        sizes = [len(plan.split(corpus, f)[1]) for f in range(4)]
        assert max(sizes) - min(sizes) <= 1

    def test_json_roundtrip(self):
        corpus = corpus_with_classes({"female": 4, "male": 4})
        plan = make_folds(corpus, 2, "gender", seed=5)
        back = FoldPlan.from_json_dict(json.loads(json.dumps(plan.to_json_dict())))
        assert back == plan


class TestMetrics:
    def test_accuracy_half(self):
        assert accuracy([("A", "A"), ("A", "B")]) == 0.5

    def test_accuracy_all_correct(self):
        assert accuracy([("A", "A")] * 7) == 1.0

    def test_accuracy_all_wrong(self):
        assert accuracy([("A", "B")] * 3) == 0.0

    def test_accuracy_empty_rejected(self):
        with pytest.raises(DataError):
            accuracy([])

    def test_baseline_fractions(self):
        labels = ["female"] * 6 + ["male"] * 4
        assert class_probability_baseline(labels) == {"female": 0.6, "male": 0.4}

    def test_baseline_single_class(self):
        assert class_probability_baseline(["x"] * 5) == {"x": 1.0}

    def test_baseline_uniform(self):
        labels = [str(i) for i in range(5) for _ in range(3)]
        baseline = class_probability_baseline(labels)
        assert all(v == pytest.approx(0.2) for v in baseline.values())
        assert abs(sum(baseline.values()) - 1.0) <= 1e-12

    def test_baseline_empty_rejected(self):
        with pytest.raises(DataError):
            class_probability_baseline([])

    def test_majority_predictor_accuracy_equals_majority_prior(self):
        labels = ["b"] * 7 + ["a"] * 3
        baseline = class_probability_baseline(labels)
        majority = max(baseline, key=lambda c: baseline[c])
        preds = [(gold, majority) for gold in labels]
        assert accuracy(preds) == baseline[majority]


class TestReports:
    def sample_report(self):
        fold_preds = [
            [("a", "a"), ("b", "a")],
            [("a", "a"), ("b", "b"), ("b", "a")],
        ]
        return build_report("demo", "gender", "profile", fold_preds,
                            counts={"skipped": 1}, config={"k": 2})

    def test_mean_is_fold_mean(self):
        report = self.sample_report()
        assert report.fold_accuracies == (0.5, 2 / 3)
        assert report.mean_accuracy == (0.5 + 2 / 3) / 2

    def test_overall_accuracy_pooled(self):
        report = self.sample_report()
        assert report.overall_accuracy == 3 / 5

    def test_per_class_counts(self):
        report = self.sample_report()
        assert report.per_class["a"] == {
            "support": 2, "correct": 2, "accuracy": 1.0, "baseline": 2 / 5}
        assert report.per_class["b"] == {
            "support": 3, "correct": 1, "accuracy": 1 / 3, "baseline": 3 / 5}

    def test_total_probability_identity_exact(self):
        report = self.sample_report()
        total = Fraction(0)
        for row in report.per_class.values():
            total += Fraction(row["support"], report.counts["instances"]) * \
                Fraction(row["correct"], row["support"])
        assert total == Fraction(3, 5)
        assert Fraction(3, 5) == Fraction(
            sum(r["correct"] for r in report.per_class.values()),
            report.counts["instances"])

    def test_accuracies_validated(self):
        with pytest.raises(DataError):
            EvaluationReport(
                method="m", task="age", unit="profile",
                fold_accuracies=(1.5,), mean_accuracy=1.5, overall_accuracy=None,
                per_class={}, counts={}, config={})

    def test_json_roundtrip(self):
        report = self.sample_report()
        text = render_report(report, "json")
        back = EvaluationReport.from_json_dict(json.loads(text))
        assert back.to_json_dict() == report.to_json_dict()

    def test_json_deterministic(self):
        assert render_report(self.sample_report(), "json") == \
            render_report(self.sample_report(), "json")

    def test_markdown_cell_format(self):
        fold_preds = [[("female", "female")] * 578 + [("female", "male")] * 422 +
                      [("male", "male")] * 100]
        report = build_report("per-image (all)", "gender", "image", fold_preds,
                              counts={}, config={})
        md = render_report(report, "markdown")
        # accuracy [class probability] cells, paper-table style
        assert "| female | 0.578 [0.909] |" in md

    def test_unknown_format(self):
        with pytest.raises(DataError):
            render_report(self.sample_report(), "yaml")

    def test_scenario_table_column_pairs(self):
        sections = {}
        for variant in ("a", "b", "c"):
            for source in ("tweeted", "retweeted"):
                preds = [[("x", "x"), ("y", "x")]]
                sections[f"{variant}:{source}"] = build_report(
                    f"scenario ({variant}:{source})", "age", "image", preds,
                    counts={}, config={})
        composite = EvaluationReport(
            method="scenarios (a/b/c)", task="age", unit="composite",
            fold_accuracies=(), mean_accuracy=None, overall_accuracy=None,
            per_class={}, counts={}, config={}, sections=sections)
        table = render_scenario_table(composite)
        header = table.splitlines()[0]
        assert "(a) tweeted" in header and "(a) retweeted" in header
        assert "(b) tweeted" in header and "(c) retweeted" in header
        assert table.splitlines()[2].count("0.500") == 6
        md = render_report(composite, "markdown")
        assert "(a) tweeted" in md
