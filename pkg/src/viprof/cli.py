"""Command-line entry point: ingest -> stats -> folds -> featurize -> train ->
eval -> analyze, plus a synthetic-corpus generator.

All artifacts are plain JSON / JSONL / CSV so experiment outputs diff cleanly;
every run writes a config snapshot next to its outputs. Exit codes: 0 success,
1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .corpus import Corpus, corpus_from_json, corpus_stats, corpus_to_json, load_corpus
from .errors import DataError, ViprofError
from .evaluation import FoldPlan, make_folds, render_report
from .pipelines import (
    METHOD_IDS, MethodSpec, SourceScenario, run_method, run_per_image_eval,
    run_scenarios_table, run_source_scenario, run_thousand_words,
)
from .svm import TrainConfig, save_model, train_multiclass
from .textfeat import SparseVector, build_vocabulary, profile_tokens, vectorize, vocabulary_to_json
from .util import atomic_write_text, dump_json, read_json, write_json
from .visfeat import build_prototype, load_embeddings, prototypes_to_jsonl

SOURCE_CHOICES = {"all": "all", "tweets": "tweeted", "retweets": "retweeted"}


class _Parser(argparse.ArgumentParser):
    """argparse reserves exit code 2 for usage errors; this tool uses 1."""

    def error(self, message):  # noqa: A002 - argparse signature
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _jobs_default() -> int:
    try:
        return max(1, int(os.environ.get("VIPROF_JOBS", "1")))
    except ValueError:
        return 1


def _snapshot(args: argparse.Namespace, out: str | Path) -> None:
    """Config snapshot alongside the output (reproducibility record)."""
    out = Path(out)
    payload = {
        "tool": "viprof",
        "version": __version__,
        "command": args.command,
        "args": {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items())
            if k not in ("func", "command") and v is not None
        },
    }
    target = out / "config.json" if out.is_dir() else out.with_name(out.name + ".config.json")
    write_json(target, payload)


def _read_corpus(path: str) -> Corpus:
    try:
        doc = read_json(path)
    except OSError as exc:
        raise DataError(f"unreadable corpus snapshot {path}: {exc}") from None
    return corpus_from_json(doc)


def _read_folds(path: str) -> FoldPlan:
    try:
        doc = read_json(path)
    except OSError as exc:
        raise DataError(f"unreadable fold plan {path}: {exc}") from None
    return FoldPlan.from_json_dict(doc)


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        C=args.C, tolerance=args.tolerance, max_outer_iters=args.max_iters,
        seed=args.seed, bias=not args.no_bias,
    )


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--C", type=float, default=1.0)
    parser.add_argument("--tolerance", type=float, default=1e-3)
    parser.add_argument("--max-iters", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--no-bias", action="store_true")


def _add_eval_common(parser: argparse.ArgumentParser, embeddings_required: bool = True) -> None:
    parser.add_argument("--task", choices=("age", "gender"), required=True)
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--embeddings", required=embeddings_required)
    parser.add_argument("--folds", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--markdown", help="also render the report as Markdown")
    parser.add_argument("--figures", help="directory for report figures (PNG)")
    parser.add_argument("--jobs", type=int, default=_jobs_default())
    _add_train_flags(parser)


def _emit_report(report, args: argparse.Namespace) -> None:
    atomic_write_text(args.out, render_report(report, "json"))
    if args.markdown:
        atomic_write_text(args.markdown, render_report(report, "markdown"))
    if args.figures:
        from .figures import report_figures
        stem = Path(args.out).stem
        report_figures(report, args.figures, stem)
    _snapshot(args, args.out)


# --- subcommand handlers ------------------------------------------------------

def _cmd_ingest(args) -> int:
    corpus = load_corpus(args.root, {"en": "EN", "sp": "SP"}[args.lang])
    write_json(args.out, corpus_to_json(corpus))
    _snapshot(args, args.out)
    if corpus.summary and corpus.summary.profiles_without_images:
        print(
            f"warning: {len(corpus.summary.profiles_without_images)} profiles have no images",
            file=sys.stderr,
        )
    print(f"ingested {len(corpus.profiles)} profiles, {len(corpus.images)} images",
          file=sys.stderr)
    return 0


def _cmd_stats(args) -> int:
    corpus = _read_corpus(args.corpus)
    stats = corpus_stats(corpus)
    text = dump_json(stats.to_json_dict()) if args.format == "json" else stats.to_markdown()
    if args.out:
        atomic_write_text(args.out, text)
        _snapshot(args, args.out)
    else:
        sys.stdout.write(text)
    if args.figures:
        from .figures import stats_figure
        figdir = Path(args.figures)
        stats_figure(stats, figdir / f"stats_{corpus.language.lower()}.png")
        if not args.out:
            _snapshot(args, figdir)
    return 0


def _cmd_folds(args) -> int:
    corpus = _read_corpus(args.corpus)
    plan = make_folds(corpus, args.k, args.task, args.seed,
                      allow_missing_class=args.allow_missing_class)
    write_json(args.out, plan.to_json_dict())
    _snapshot(args, args.out)
    for warning in plan.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _cmd_featurize_text(args) -> int:
    import json as _json

    corpus = _read_corpus(args.corpus)
    folds = _read_folds(args.folds)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    tokens = {pid: profile_tokens(p) for pid, p in corpus.profiles.items()}
    for fold in range(folds.k):
        train_ids, _ = folds.split(corpus, fold)
        vocab = build_vocabulary([tokens[pid] for pid in train_ids], args.k)
        write_json(outdir / f"fold{fold:02d}.vocab.json", vocabulary_to_json(vocab))
        lines = []
        for pid in corpus.profiles:
            vec = vectorize(tokens[pid], vocab, binary=args.binary)
            row = {
                "profile_id": pid,
                "dimension": vec.dimension,
                "entries": [[i, v] for i, v in vec.entries],
            }
            lines.append(_json.dumps(row) + "\n")
        atomic_write_text(outdir / f"fold{fold:02d}.vectors.jsonl", "".join(lines))
    _snapshot(args, outdir)
    return 0


def _cmd_featurize_visual(args) -> int:
    corpus = _read_corpus(args.corpus)
    store = load_embeddings(args.embeddings)
    source = SOURCE_CHOICES[args.source]
    protos = [
        build_prototype(profile, corpus, store, source)
        for profile in corpus.profiles.values()
    ]
    prototypes_to_jsonl(protos, args.out)
    _snapshot(args, args.out)
    degenerate = sum(1 for p in protos if p.degenerate)
    if degenerate:
        print(f"warning: {degenerate} degenerate (zero-image) prototypes", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    import json as _json

    from .corpus import parse_truth_file

    try:
        truth_text = Path(args.labels).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"unreadable truth file {args.labels}: {exc}") from None
    labels_by_id = {}
    for pid, gender, age in parse_truth_file(truth_text):
        labels_by_id[pid] = age.value if args.task == "age" else gender.value

    X, y = [], []
    try:
        feature_lines = Path(args.features).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"unreadable feature file {args.features}: {exc}") from None
    for lineno, line in enumerate(feature_lines, start=1):
        if not line.strip():
            continue
        try:
            doc = _json.loads(line)
            pid = doc["profile_id"]
            if "entries" in doc:
                dim = doc.get("dimension")
                entries = [(int(i), float(v)) for i, v in doc["entries"]]
                if dim is None:
                    dim = (max(i for i, _ in entries) + 1) if entries else 0
                x = SparseVector(dimension=dim, entries=tuple(entries))
            else:
                x = doc["values"]
        except (KeyError, TypeError, ValueError, _json.JSONDecodeError) as exc:
            raise DataError(f"{args.features} line {lineno}: malformed feature row: {exc}") from None
        if pid not in labels_by_id:
            raise DataError(f"{args.features} line {lineno}: profile {pid!r} not in truth file")
        X.append(x)
        y.append(labels_by_id[pid])
    if isinstance(X[0] if X else None, SparseVector):
        dim = max(x.dimension for x in X)
        X = [SparseVector(dimension=dim, entries=x.entries) for x in X]
    model = train_multiclass(X, y, _train_config(args))
    save_model(model, args.out)
    _snapshot(args, args.out)
    return 0


def _cmd_eval(args) -> int:
    corpus = _read_corpus(args.corpus)
    folds = _read_folds(args.folds)
    kind = METHOD_IDS[args.method]
    spec = MethodSpec(kind=kind, source_filter=SOURCE_CHOICES[args.source], task=args.task)
    store = None
    if kind.startswith(("visual", "multimodal")):
        if not args.embeddings:
            raise DataError(f"method {args.method} requires --embeddings")
        store = load_embeddings(args.embeddings)
    report = run_method(spec, corpus, folds, store, _train_config(args), jobs=args.jobs)
    _emit_report(report, args)
    return 0


def _cmd_eval_scenarios(args) -> int:
    corpus = _read_corpus(args.corpus)
    folds = _read_folds(args.folds)
    store = load_embeddings(args.embeddings)
    cfg = _train_config(args)
    if args.variant == "all":
        report = run_scenarios_table(corpus, folds, store, args.task, cfg, jobs=args.jobs)
    else:
        if not args.source:
            raise DataError("--source is required unless --variant all")
        scenario = SourceScenario(args.variant, SOURCE_CHOICES[args.source])
        report = run_source_scenario(corpus, folds, store, scenario, args.task,
                                     cfg, jobs=args.jobs)
    _emit_report(report, args)
    return 0


def _cmd_eval_per_image(args) -> int:
    corpus = _read_corpus(args.corpus)
    folds = _read_folds(args.folds)
    store = load_embeddings(args.embeddings)
    report = run_per_image_eval(corpus, folds, store, args.task, _train_config(args),
                                source_filter=SOURCE_CHOICES[args.source], jobs=args.jobs)
    _emit_report(report, args)
    return 0


def _cmd_eval_thousand_words(args) -> int:
    corpus = _read_corpus(args.corpus)
    folds = _read_folds(args.folds)
    store = load_embeddings(args.embeddings)
    report = run_thousand_words(corpus, folds, store, args.task, _train_config(args),
                                chunk_size=args.chunk_size, jobs=args.jobs)
    _emit_report(report, args)
    return 0


def _cmd_analyze(args) -> int:
    from .figures import difference_figure, top_categories_figure
    from .qualitative import (
        by_age, by_gender, difference_list, export_cloud, group_histogram,
        load_category_names,
    )
    from .visfeat import SOFTMAX_LAYER

    corpus = _read_corpus(args.corpus)
    if args.lang and corpus.language != {"en": "EN", "sp": "SP"}[args.lang]:
        raise DataError(f"corpus language is {corpus.language}, not {args.lang!r}")
    store = load_embeddings(args.embeddings)
    names = load_category_names() if store.dim(SOFTMAX_LAYER) == 1000 else None

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    if args.group_by == "gender":
        groups = [("female", by_gender("female")), ("male", by_gender("male"))]
    else:
        from .corpus import AgeRange
        groups = [(age.value, by_age(age.value)) for age in AgeRange]

    histograms = {}
    for label, selector in groups:
        try:
            hist = group_histogram(corpus, store, selector, group=label)
        except DataError as exc:
            print(f"warning: skipping group {label}: {exc}", file=sys.stderr)
            continue
        histograms[label] = hist
        safe = label.replace("-", "_")
        write_json(outdir / f"histogram_{safe}.json", hist.to_json_dict(names))
        export_cloud(hist, outdir / f"cloud_{safe}.csv", names)
        top_categories_figure(hist, outdir / f"top_{safe}.png", names, n=args.top)

    if args.group_by == "gender" and set(histograms) == {"female", "male"}:
        diff = difference_list(histograms["female"], histograms["male"], args.top, names)
        write_json(outdir / "difference_female_male.json", diff.to_json_dict())
        atomic_write_text(outdir / "difference_female_male.md", diff.to_markdown())
        difference_figure(diff, outdir / "difference_female_male.png")

    _snapshot(args, outdir)
    return 0


def _cmd_synth(args) -> int:
    from .synth import SynthSpec, write_synthetic

    spec = SynthSpec(
        n_profiles=args.profiles,
        language={"en": "EN", "sp": "SP"}[args.lang],
        images_per_profile=args.images_per_profile,
        tweets_per_profile=args.tweets_per_profile,
        tokens_per_tweet=args.tokens_per_tweet,
        text_signal=args.text_signal,
        text_marker_rate=args.text_marker_rate,
        image_signal=args.image_signal,
        separation=args.separation,
        softmax_dim=1000 if args.softmax else None,
        retweet_fraction=args.retweet_fraction,
        seed=args.seed,
    )
    write_synthetic(spec, args.out, args.embeddings_out)
    _snapshot(args, Path(args.out))
    return 0


def _cmd_extract(args) -> int:
    import csv as _csv

    from .extract import extract_embeddings
    from .visfeat import write_embeddings_jsonl

    pairs = []
    try:
        with open(args.manifest, "r", encoding="utf-8", newline="") as fh:
            reader = _csv.DictReader(fh)
            for row in reader:
                if not row.get("path"):
                    continue
                pairs.append((row["image_id"], row["path"]))
    except OSError as exc:
        raise DataError(f"unreadable manifest {args.manifest}: {exc}") from None

    result = extract_embeddings(args.model, pairs)
    write_embeddings_jsonl(
        ((v.image_id, v.layer, v.values) for v in result.vectors), args.out)
    _snapshot(args, args.out)
    for image_id, message in result.errors:
        print(f"warning: {image_id}: {message}", file=sys.stderr)
    print(f"extracted {len(result.vectors)} vectors, {len(result.errors)} failures",
          file=sys.stderr)
    return 0


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="viprof", description=__doc__)
    parser.add_argument("--version", action="version", version=f"viprof {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="load a corpus directory into a JSON snapshot")
    p.add_argument("--root", required=True)
    p.add_argument("--lang", choices=("en", "sp"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("stats", help="descriptive image statistics of a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("json", "markdown"), default="json")
    p.add_argument("--out")
    p.add_argument("--figures")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("folds", help="build a subject-independent fold plan")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--task", choices=("age", "gender"), required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--allow-missing-class", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_folds)

    p = sub.add_parser("featurize", help="write feature files")
    feat_sub = p.add_subparsers(dest="featurize_kind", required=True, parser_class=_Parser)

    pt = feat_sub.add_parser("text", help="per-fold vocabularies and BoW vectors")
    pt.add_argument("--corpus", required=True)
    pt.add_argument("--folds", required=True)
    pt.add_argument("--k", type=int, default=10000)
    pt.add_argument("--binary", action="store_true")
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=_cmd_featurize_text)

    pv = feat_sub.add_parser("visual", help="per-profile prototype vectors")
    pv.add_argument("--corpus", required=True)
    pv.add_argument("--embeddings", required=True)
    pv.add_argument("--source", choices=tuple(SOURCE_CHOICES), default="all")
    pv.add_argument("--out", required=True)
    pv.set_defaults(func=_cmd_featurize_visual)

    p = sub.add_parser("train", help="train a one-vs-rest linear SVM from features")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True, help="truth.txt supplying the labels")
    p.add_argument("--task", choices=("age", "gender"), required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="cross-validated evaluation of one method")
    p.add_argument("--method", choices=tuple(METHOD_IDS), required=True)
    p.add_argument("--source", choices=tuple(SOURCE_CHOICES), default="all")
    _add_eval_common(p, embeddings_required=False)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("eval-scenarios", help="image-source scenarios (a)/(b)/(c)")
    p.add_argument("--variant", choices=("a", "b", "c", "all"), required=True)
    p.add_argument("--source", choices=("tweets", "retweets"))
    _add_eval_common(p)
    p.set_defaults(func=_cmd_eval_scenarios)

    p = sub.add_parser("eval-per-image", help="per-image evaluation with baselines")
    p.add_argument("--source", choices=tuple(SOURCE_CHOICES), default="all")
    _add_eval_common(p)
    p.set_defaults(func=_cmd_eval_per_image)

    p = sub.add_parser("eval-thousand-words", help="text chunks vs. individual images")
    p.add_argument("--chunk-size", type=int, default=1000)
    _add_eval_common(p)
    p.set_defaults(func=_cmd_eval_thousand_words)

    p = sub.add_parser("analyze", help="category histograms, differences, cloud CSVs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--group-by", choices=("gender", "age"), required=True)
    p.add_argument("--lang", choices=("en", "sp"))
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted signal")
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings-out")
    p.add_argument("--lang", choices=("en", "sp"), default="en")
    p.add_argument("--profiles", type=int, default=40)
    p.add_argument("--images-per-profile", type=int, default=20)
    p.add_argument("--tweets-per-profile", type=int, default=20)
    p.add_argument("--tokens-per-tweet", type=int, default=12)
    p.add_argument("--text-signal", choices=("both", "age", "gender", "none"), default="both")
    p.add_argument("--text-marker-rate", type=float, default=0.3)
    p.add_argument("--image-signal", choices=("both", "age", "gender", "none"), default="both")
    p.add_argument("--separation", type=float, default=10.0)
    p.add_argument("--retweet-fraction", type=float, default=0.5)
    p.add_argument("--softmax", action="store_true",
                   help="also generate final-layer score vectors")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("extract", help="embed images with a pre-trained network (optional capability)")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_extract)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    except ViprofError as exc:
        print(f"viprof: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"viprof: error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main(sys.argv[1:]))
