"""End-to-end method families over subject-independent folds.

Six profile-level methods are provided: bag-of-words text at two vocabulary
sizes, per-image classification with a majority vote, prototype (mean
embedding) classification, and the early fusion of BoW with the prototype at
both vocabulary sizes. On top of those sit the per-image evaluation, the
image-source scenarios, and the thousand-word-chunk comparison.

Leakage discipline: everything fitted (vocabulary, SVM, nothing else) sees
only training-fold profiles. Each report carries an audit block recording,
per fold, exactly which profiles fed fitting, so tests can assert the
train/test separation instead of trusting it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus, SOURCE_FILTERS
from .errors import DataError
from .evaluation import EvaluationReport, FoldPlan, build_report
from .svm import TrainConfig, predict, train_multiclass
from .textfeat import build_vocabulary, profile_tokens, vectorize
from .visfeat import EmbeddingStore, HIDDEN_LAYER, build_prototype, concat_multimodal

METHOD_KINDS = (
    "textual_2k", "textual_10k",
    "visual_individual", "visual_prototype",
    "multimodal_2k", "multimodal_10k",
)

# CLI spelling -> method kind; the short ids mirror the report row labels.
METHOD_IDS = {
    "t1": "textual_2k",
    "t2": "textual_10k",
    "v3": "visual_individual",
    "v4": "visual_prototype",
    "m3": "multimodal_2k",
    "m6": "multimodal_10k",
}


@dataclass(frozen=True)
class MethodSpec:
    kind: str
    source_filter: str = "all"
    task: str = "age"

    def __post_init__(self) -> None:
        if self.kind not in METHOD_KINDS:
            raise DataError(f"unknown method kind {self.kind!r}")
        if self.source_filter not in SOURCE_FILTERS:
            raise DataError(f"unknown source filter {self.source_filter!r}")

    @property
    def vocab_size(self) -> int | None:
        if self.kind.endswith("_2k"):
            return 2000
        if self.kind.endswith("_10k"):
            return 10000
        return None


@dataclass(frozen=True)
class SourceScenario:
    variant: str  # "a": train one source / test all; "b": train all / test one
    source: str   # "c": train and test the same single source

    def __post_init__(self) -> None:
        if self.variant not in ("a", "b", "c"):
            raise DataError(f"unknown scenario variant {self.variant!r}")
        if self.source not in ("tweeted", "retweeted"):
            raise DataError(f"unknown scenario source {self.source!r}")


def majority_vote(labels: Sequence[str], priors: dict[str, float]) -> str:
    """Most frequent label; ties go to the larger prior, then lexicographic."""
    if not labels:
        raise DataError("majority vote over an empty label list")
    counts: dict[str, int] = {}
    for label in labels:
        counts[label] = counts.get(label, 0) + 1
    top = max(counts.values())
    tied = [label for label, n in counts.items() if n == top]
    if len(tied) > 1:
        best_prior = max(priors.get(label, 0.0) for label in tied)
        tied = [label for label in tied if priors.get(label, 0.0) == best_prior]
    return min(tied)


def _training_majority(priors: dict[str, float]) -> str:
    best = max(priors.values())
    return min(label for label, p in priors.items() if p == best)


def _map_folds(worker: Callable[[int], tuple], k: int, jobs: int) -> list[tuple]:
    if jobs <= 1:
        return [worker(f) for f in range(k)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, range(k)))


def _audit_block(fold: int, train_ids: list[str], test_ids: list[str],
                 fit_ids: Sequence[str], **extra) -> dict:
    block = {
        "fold": fold,
        "train_profiles": list(train_ids),
        "test_profiles": list(test_ids),
        "fit_profiles": sorted(set(fit_ids)),
    }
    block.update(extra)
    return block


def run_textual(
    corpus: Corpus, folds: FoldPlan, k: int, task: str,
    cfg: TrainConfig = TrainConfig(), binary_weights: bool = False,
    jobs: int = 1,
) -> EvaluationReport:
    """Bag-of-words over the top-k training vocabulary, one vector per profile."""
    tokens = {pid: profile_tokens(p) for pid, p in corpus.profiles.items()}

    def one_fold(f: int):
        train_ids, test_ids = folds.split(corpus, f)
        vocab = build_vocabulary([tokens[pid] for pid in train_ids], k)
        X_train = [vectorize(tokens[pid], vocab, binary=binary_weights) for pid in train_ids]
        y_train = [corpus.profiles[pid].label(task) for pid in train_ids]
        model = train_multiclass(X_train, y_train, cfg)
        pairs = []
        for pid in test_ids:
            x = vectorize(tokens[pid], vocab, binary=binary_weights)
            label, _ = predict(model, x)
            pairs.append((corpus.profiles[pid].label(task), label))
        return pairs, _audit_block(f, train_ids, test_ids, train_ids,
                                   vocabulary_size=len(vocab))

    results = _map_folds(one_fold, folds.k, jobs)
    return build_report(
        method=f"bow-{k}", task=task, unit="profile",
        fold_predictions=[r[0] for r in results],
        counts={}, config={"k": k, "binary_weights": binary_weights,
                           "train": cfg.to_json_dict(), "folds": folds.k,
                           "folds_seed": folds.seed},
        audit={"folds": [r[1] for r in results]},
    )


def _image_instances(
    corpus: Corpus, profile_ids: Sequence[str], store: EmbeddingStore,
    source_filter: str, task: str,
) -> tuple[list[np.ndarray], list[str], list[str], int]:
    """(vectors, labels, image_ids, missing_count) over the profiles' images."""
    X, y, ids = [], [], []
    missing = 0
    for pid in profile_ids:
        label = corpus.profiles[pid].label(task)
        for image_id in corpus.image_ids(pid, source_filter):
            vec = store.get(image_id, HIDDEN_LAYER)
            if vec is None:
                missing += 1
                continue
            X.append(vec.astype(np.float64))
            y.append(label)
            ids.append(image_id)
    return X, y, ids, missing


def run_visual_individual(
    corpus: Corpus, folds: FoldPlan, store: EmbeddingStore,
    source_filter: str = "all", task: str = "age",
    cfg: TrainConfig = TrainConfig(), jobs: int = 1,
) -> EvaluationReport:
    """Classify each image, then majority-vote the profile label.

    Training instances are the images of training-fold profiles, each labeled
    with its owner's class. Profiles with no usable image fall back to the
    training majority class and are counted as degenerate.
    """
    zero_image = 0
    missing_total = 0

    def one_fold(f: int):
        train_ids, test_ids = folds.split(corpus, f)
        X_train, y_train, _, missing = _image_instances(corpus, train_ids, store, source_filter, task)
        if not X_train:
            raise DataError(f"fold {f}: no training images with embeddings")
        model = train_multiclass(X_train, y_train, cfg)
        profile_pairs, image_pairs = [], []
        fold_zero = 0
        for pid in test_ids:
            gold = corpus.profiles[pid].label(task)
            votes = []
            for image_id in corpus.image_ids(pid, source_filter):
                vec = store.get(image_id, HIDDEN_LAYER)
                if vec is None:
                    continue
                label, _ = predict(model, vec.astype(np.float64))
                votes.append(label)
                image_pairs.append((gold, label))
            if votes:
                profile_pairs.append((gold, majority_vote(votes, model.priors)))
            else:
                fold_zero += 1
                profile_pairs.append((gold, _training_majority(model.priors)))
        audit = _audit_block(f, train_ids, test_ids, train_ids,
                             train_instances=len(X_train))
        return profile_pairs, image_pairs, missing, fold_zero, audit

    results = _map_folds(one_fold, folds.k, jobs)
    missing_total = sum(r[2] for r in results)
    zero_image = sum(r[3] for r in results)

    image_level = build_report(
        method=f"per-image ({source_filter})", task=task, unit="image",
        fold_predictions=[r[1] for r in results],
        counts={"missing_embeddings": missing_total},
        config={"source_filter": source_filter, "train": cfg.to_json_dict()},
    )
    return build_report(
        method=f"per-image-vote ({source_filter})", task=task, unit="profile",
        fold_predictions=[r[0] for r in results],
        counts={"zero_image_profiles": zero_image,
                "missing_embeddings": missing_total},
        config={"source_filter": source_filter, "train": cfg.to_json_dict(),
                "folds": folds.k, "folds_seed": folds.seed},
        sections={"image_level": image_level},
        audit={"folds": [r[4] for r in results]},
    )


def run_visual_prototype(
    corpus: Corpus, folds: FoldPlan, store: EmbeddingStore,
    source_filter: str = "all", task: str = "age",
    cfg: TrainConfig = TrainConfig(), jobs: int = 1,
) -> EvaluationReport:
    """One mean-embedding prototype per profile, classified directly."""
    protos = {
        pid: build_prototype(p, corpus, store, source_filter)
        for pid, p in corpus.profiles.items()
    }
    degenerate = sum(1 for p in protos.values() if p.degenerate)

    def one_fold(f: int):
        train_ids, test_ids = folds.split(corpus, f)
        X_train = [protos[pid].values for pid in train_ids]
        y_train = [corpus.profiles[pid].label(task) for pid in train_ids]
        model = train_multiclass(X_train, y_train, cfg)
        pairs = []
        for pid in test_ids:
            label, _ = predict(model, protos[pid].values)
            pairs.append((corpus.profiles[pid].label(task), label))
        return pairs, _audit_block(f, train_ids, test_ids, train_ids)

    results = _map_folds(one_fold, folds.k, jobs)
    return build_report(
        method=f"prototype ({source_filter})", task=task, unit="profile",
        fold_predictions=[r[0] for r in results],
        counts={"degenerate_prototypes": degenerate},
        config={"source_filter": source_filter, "train": cfg.to_json_dict(),
                "folds": folds.k, "folds_seed": folds.seed},
        audit={"folds": [r[1] for r in results]},
    )


def run_multimodal(
    corpus: Corpus, folds: FoldPlan, store: EmbeddingStore,
    k: int, task: str, cfg: TrainConfig = TrainConfig(),
    l2_blocks: bool = False, jobs: int = 1,
) -> EvaluationReport:
    """Early fusion: BoW block concatenated with the all-images prototype."""
    tokens = {pid: profile_tokens(p) for pid, p in corpus.profiles.items()}
    protos = {
        pid: build_prototype(p, corpus, store, "all")
        for pid, p in corpus.profiles.items()
    }
    degenerate = sum(1 for p in protos.values() if p.degenerate)

    def one_fold(f: int):
        train_ids, test_ids = folds.split(corpus, f)
        vocab = build_vocabulary([tokens[pid] for pid in train_ids], k)

        def features(pid: str) -> np.ndarray:
            bow = vectorize(tokens[pid], vocab)
            return concat_multimodal(bow, protos[pid], l2_blocks=l2_blocks)

        X_train = [features(pid) for pid in train_ids]
        y_train = [corpus.profiles[pid].label(task) for pid in train_ids]
        model = train_multiclass(X_train, y_train, cfg)
        pairs = []
        for pid in test_ids:
            label, _ = predict(model, features(pid))
            pairs.append((corpus.profiles[pid].label(task), label))
        return pairs, _audit_block(f, train_ids, test_ids, train_ids,
                                   vocabulary_size=len(vocab))

    results = _map_folds(one_fold, folds.k, jobs)
    return build_report(
        method=f"bow-{k}+prototype", task=task, unit="profile",
        fold_predictions=[r[0] for r in results],
        counts={"degenerate_prototypes": degenerate},
        config={"k": k, "l2_blocks": l2_blocks, "train": cfg.to_json_dict(),
                "folds": folds.k, "folds_seed": folds.seed},
        audit={"folds": [r[1] for r in results]},
    )


def _per_image_fold_runner(
    corpus: Corpus, folds: FoldPlan, store: EmbeddingStore, task: str,
    cfg: TrainConfig, train_filter: str, test_filter: str,
):
    """Shared machinery for per-image evaluation and the source scenarios."""

    def one_fold(f: int):
        train_ids, test_ids = folds.split(corpus, f)
        X_train, y_train, train_imgs, train_missing = _image_instances(
            corpus, train_ids, store, train_filter, task)
        X_test, y_test, test_imgs, test_missing = _image_instances(
            corpus, test_ids, store, test_filter, task)
        if not X_train:
            raise DataError(f"fold {f}: no training images with embeddings")
        model = train_multiclass(X_train, y_train, cfg)
        pairs = []
        for vec, gold in zip(X_test, y_test):
            label, _ = predict(model, vec)
            pairs.append((gold, label))
        audit = _audit_block(
            f, train_ids, test_ids, train_ids,
            train_images=train_imgs, test_images=test_imgs,
        )
        return pairs, train_missing + test_missing, audit

    return one_fold


def run_per_image_eval(
    corpus: Corpus, folds: FoldPlan, store: EmbeddingStore, task: str,
    cfg: TrainConfig = TrainConfig(), source_filter: str = "all",
    jobs: int = 1,
) -> EvaluationReport:
    """Every image is an instance carrying its profile's label; accuracy is
    reported per class next to the class-probability baseline."""
    one_fold = _per_image_fold_runner(corpus, folds, store, task, cfg,
                                      source_filter, source_filter)
    results = _map_folds(one_fold, folds.k, jobs)
    return build_report(
        method=f"per-image ({source_filter})", task=task, unit="image",
        fold_predictions=[r[0] for r in results],
        counts={"missing_embeddings": sum(r[1] for r in results)},
        config={"source_filter": source_filter, "train": cfg.to_json_dict(),
                "folds": folds.k, "folds_seed": folds.seed},
        audit={"folds": [r[2] for r in results]},
    )


def run_source_scenario(
    corpus: Corpus, folds: FoldPlan, store: EmbeddingStore,
    scenario: SourceScenario, task: str,
    cfg: TrainConfig = TrainConfig(), jobs: int = 1,
) -> EvaluationReport:
    """Per-image evaluation with train/test sets constrained by image source.

    (a) trains on one source and tests on all images; (b) trains on all images
    and tests on one source; (c) restricts both sides to the source.
    """
    if not corpus.has_source(scenario.source):
        raise DataError(f"corpus has no {scenario.source} images")
    train_filter = scenario.source if scenario.variant in ("a", "c") else "all"
    test_filter = scenario.source if scenario.variant in ("b", "c") else "all"
    one_fold = _per_image_fold_runner(corpus, folds, store, task, cfg,
                                      train_filter, test_filter)
    results = _map_folds(one_fold, folds.k, jobs)
    return build_report(
        method=f"scenario ({scenario.variant}:{scenario.source})", task=task, unit="image",
        fold_predictions=[r[0] for r in results],
        counts={"missing_embeddings": sum(r[1] for r in results)},
        config={"variant": scenario.variant, "source": scenario.source,
                "train_filter": train_filter, "test_filter": test_filter,
                "train": cfg.to_json_dict(), "folds": folds.k,
                "folds_seed": folds.seed},
        audit={"folds": [r[2] for r in results]},
    )


def run_scenarios_table(
    corpus: Corpus, folds: FoldPlan, store: EmbeddingStore, task: str,
    cfg: TrainConfig = TrainConfig(), jobs: int = 1,
) -> EvaluationReport:
    """All six (variant, source) scenario runs as one composite report."""
    sections = {}
    for variant in ("a", "b", "c"):
        for source in ("tweeted", "retweeted"):
            if not corpus.has_source(source):
                continue
            sections[f"{variant}:{source}"] = run_source_scenario(
                corpus, folds, store, SourceScenario(variant, source), task,
                cfg, jobs=jobs,
            )
    return EvaluationReport(
        method="scenarios (a/b/c)", task=task, unit="composite",
        fold_accuracies=(), mean_accuracy=None, overall_accuracy=None,
        per_class={}, counts={}, config={"train": cfg.to_json_dict()},
        sections=sections,
    )


def token_chunks(tokens: Sequence[str], size: int) -> list[list[str]]:
    """Consecutive non-overlapping chunks; a remainder shorter than size is dropped."""
    if size < 1:
        raise DataError(f"chunk size must be >= 1, got {size}")
    usable = (len(tokens) // size) * size
    return [list(tokens[i:i + size]) for i in range(0, usable, size)]


def run_thousand_words(
    corpus: Corpus, folds: FoldPlan, store: EmbeddingStore, task: str,
    cfg: TrainConfig = TrainConfig(), chunk_size: int = 1000,
    vocab_sizes: tuple[int, ...] = (2000, 10000), jobs: int = 1,
) -> EvaluationReport:
    """Fixed-length text chunks versus individually classified images.

    Each profile contributes one instance per consecutive chunk of
    ``chunk_size`` tokens (short remainders are dropped; profiles shorter than
    one chunk contribute nothing and are counted). The visual columns classify
    every image individually, restricted to all / tweeted / retweeted sources.
    """
    tokens = {pid: profile_tokens(p) for pid, p in corpus.profiles.items()}
    chunks = {pid: token_chunks(t, chunk_size) for pid, t in tokens.items()}
    without_chunks = sum(1 for c in chunks.values() if not c)

    def textual_report(k: int) -> EvaluationReport:
        def one_fold(f: int):
            train_ids, test_ids = folds.split(corpus, f)
            train_docs = [chunk for pid in train_ids for chunk in chunks[pid]]
            vocab = build_vocabulary(train_docs, k)
            X_train, y_train = [], []
            for pid in train_ids:
                label = corpus.profiles[pid].label(task)
                for chunk in chunks[pid]:
                    X_train.append(vectorize(chunk, vocab))
                    y_train.append(label)
            if not X_train:
                raise DataError(f"fold {f}: no training chunks of {chunk_size} tokens")
            model = train_multiclass(X_train, y_train, cfg)
            pairs = []
            for pid in test_ids:
                gold = corpus.profiles[pid].label(task)
                for chunk in chunks[pid]:
                    label, _ = predict(model, vectorize(chunk, vocab))
                    pairs.append((gold, label))
            return pairs, _audit_block(f, train_ids, test_ids, train_ids,
                                       vocabulary_size=len(vocab))

        results = _map_folds(one_fold, folds.k, jobs)
        return build_report(
            method=f"chunked bow-{k}", task=task, unit="chunk",
            fold_predictions=[r[0] for r in results],
            counts={"profiles_without_chunks": without_chunks},
            config={"k": k, "chunk_size": chunk_size, "train": cfg.to_json_dict()},
            audit={"folds": [r[1] for r in results]},
        )

    sections: dict[str, EvaluationReport] = {}
    total_chunks = sum(len(c) for c in chunks.values())
    if total_chunks:
        for k in vocab_sizes:
            sections[f"textual_{k}"] = textual_report(k)
    for source_filter in SOURCE_FILTERS:
        if source_filter != "all" and not corpus.has_source(source_filter):
            continue
        sections[f"visual_{source_filter}"] = run_per_image_eval(
            corpus, folds, store, task, cfg, source_filter=source_filter, jobs=jobs,
        )

    return EvaluationReport(
        method="thousand-words", task=task, unit="composite",
        fold_accuracies=(), mean_accuracy=None, overall_accuracy=None,
        per_class={},
        counts={"profiles_without_chunks": without_chunks,
                "chunk_size": chunk_size, "total_chunks": total_chunks},
        config={"chunk_size": chunk_size, "vocab_sizes": list(vocab_sizes),
                "train": cfg.to_json_dict()},
        sections=sections,
    )


def run_method(
    spec: MethodSpec, corpus: Corpus, folds: FoldPlan,
    store: EmbeddingStore | None, cfg: TrainConfig = TrainConfig(),
    jobs: int = 1,
) -> EvaluationReport:
    """Dispatch one profile-level method from its spec."""
    if spec.kind.startswith("textual"):
        return run_textual(corpus, folds, spec.vocab_size, spec.task, cfg, jobs=jobs)
    if store is None:
        raise DataError(f"method {spec.kind} requires embeddings")
    if spec.kind == "visual_individual":
        return run_visual_individual(corpus, folds, store, spec.source_filter,
                                     spec.task, cfg, jobs=jobs)
    if spec.kind == "visual_prototype":
        return run_visual_prototype(corpus, folds, store, spec.source_filter,
                                    spec.task, cfg, jobs=jobs)
    return run_multimodal(corpus, folds, store, spec.vocab_size, spec.task,
                          cfg, jobs=jobs)
