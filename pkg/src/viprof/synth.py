"""Synthetic corpora with plantable class signal in text and/or images.

Stands in for the real (non-redistributable) data at desk scale: profiles are
assigned age/gender labels round-robin, tweets draw from a shared token pool
mixed with class-marker tokens at a configurable rate, and image embeddings
are Gaussian clusters whose means are separated along one axis per
(age, gender) combination. Separation is expressed as a multiple of the
per-component spread, so separation 0 removes the visual signal entirely.

Everything is driven by one seeded generator, so equal specs produce
byte-identical on-disk corpora.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import AgeRange, Corpus, Gender, ImageRecord, LoadSummary, Profile, Source
from .errors import DataError
from .visfeat import EmbeddingStore, HIDDEN_LAYER, LAYER_DIMS, SOFTMAX_LAYER, write_embeddings_jsonl

SIGNALS = ("both", "age", "gender", "none")


@dataclass(frozen=True)
class SynthSpec:
    n_profiles: int = 40
    language: str = "EN"
    ages: tuple[str, ...] = tuple(a.value for a in AgeRange)
    images_per_profile: int = 20
    tweets_per_profile: int = 20
    tokens_per_tweet: int = 12
    shared_tokens: int = 200
    text_signal: str = "both"
    text_marker_rate: float = 0.3
    image_signal: str = "both"
    separation: float = 10.0
    spread: float = 1.0
    embedding_dim: int = 4096
    softmax_dim: int | None = None
    retweet_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_profiles < 1:
            raise DataError("synthetic corpus needs at least one profile")
        if not self.ages:
            raise DataError("synthetic corpus needs at least one age class")
        for age in self.ages:
            AgeRange.parse(age)
        if self.text_signal not in SIGNALS or self.image_signal not in SIGNALS:
            raise DataError(f"signals must be one of {SIGNALS}")
        if not 0.0 <= self.retweet_fraction <= 1.0:
            raise DataError("retweet_fraction must be within [0, 1]")
        if not 0.0 <= self.text_marker_rate <= 1.0:
            raise DataError("text_marker_rate must be within [0, 1]")
        if self.embedding_dim < 1:
            raise DataError("embedding_dim must be >= 1")
        if self.separation < 0 or self.spread < 0:
            raise DataError("separation and spread must be non-negative")


@dataclass(frozen=True)
class SynthResult:
    corpus: Corpus
    store: EmbeddingStore
    spec: SynthSpec


def _marker_token(spec: SynthSpec, rng: np.random.Generator,
                  age_idx: int, gender_idx: int) -> str:
    if spec.text_signal == "age":
        return f"agemark{age_idx}"
    if spec.text_signal == "gender":
        return f"genmark{gender_idx}"
    # both: pick one of the two marker families
    if rng.random() < 0.5:
        return f"agemark{age_idx}"
    return f"genmark{gender_idx}"


def _cluster_mean(spec: SynthSpec, age_idx: int, gender_idx: int) -> np.ndarray:
    mean = np.zeros(spec.embedding_dim, dtype=np.float64)
    if spec.image_signal == "none" or spec.separation == 0.0:
        return mean
    n_ages = len(spec.ages)
    if spec.image_signal == "age":
        axis = age_idx
    elif spec.image_signal == "gender":
        axis = gender_idx
    else:
        axis = gender_idx * n_ages + age_idx
    mean[axis % spec.embedding_dim] = spec.separation * spec.spread
    return mean


def build_synthetic(spec: SynthSpec) -> SynthResult:
    """Generate the corpus and embedding store in memory."""
    rng = np.random.default_rng(spec.seed)
    genders = (Gender.FEMALE, Gender.MALE)
    n_ages = len(spec.ages)

    profiles: dict[str, Profile] = {}
    images: dict[str, ImageRecord] = {}
    store = EmbeddingStore()

    for i in range(spec.n_profiles):
        pid = f"u{i:04d}"
        gender_idx = i % 2
        age_idx = (i // 2) % n_ages
        gender = genders[gender_idx]
        age = AgeRange.parse(spec.ages[age_idx])

        tweets = []
        for _ in range(spec.tweets_per_profile):
            words = []
            for _ in range(spec.tokens_per_tweet):
                if spec.text_signal != "none" and rng.random() < spec.text_marker_rate:
                    words.append(_marker_token(spec, rng, age_idx, gender_idx))
                else:
                    words.append(f"w{rng.integers(spec.shared_tokens):03d}")
            tweets.append(" ".join(words))

        mean = _cluster_mean(spec, age_idx, gender_idx)
        image_ids = []
        for j in range(spec.images_per_profile):
            image_id = f"{pid}_img{j:03d}"
            source = (Source.RETWEETED if rng.random() < spec.retweet_fraction
                      else Source.TWEETED)
            images[image_id] = ImageRecord(id=image_id, profile_id=pid, source=source)
            image_ids.append(image_id)
            vec = mean + rng.normal(0.0, spec.spread, size=spec.embedding_dim)
            store.add(image_id, HIDDEN_LAYER, vec.astype(np.float32))
            if spec.softmax_dim:
                scores = rng.random(spec.softmax_dim) * 0.1
                preferred = (gender_idx * n_ages + age_idx) % spec.softmax_dim
                scores[preferred] += 1.0
                store.add(image_id, SOFTMAX_LAYER, scores.astype(np.float32))

        profiles[pid] = Profile(
            id=pid, language=spec.language, gender=gender, age=age,
            tweets=tuple(tweets), images=tuple(image_ids),
        )

    summary = LoadSummary(
        n_profiles=len(profiles), n_images=len(images),
        profiles_without_images=tuple(p.id for p in profiles.values() if not p.images),
    )
    corpus = Corpus(language=spec.language, profiles=profiles, images=images,
                    summary=summary)
    return SynthResult(corpus=corpus, store=store, spec=spec)


def write_synthetic(spec: SynthSpec, root: str | Path,
                    embeddings_path: str | Path | None = None) -> SynthResult:
    """Generate and write a loadable corpus directory (plus embedding JSONL).

    Disk embeddings must use the canonical layer lengths, so the spec's
    dimensions are pinned to 4096 (and 1000 when score vectors are enabled).
    """
    if embeddings_path is not None:
        if spec.embedding_dim != LAYER_DIMS[HIDDEN_LAYER]:
            raise DataError(
                f"on-disk embeddings require embedding_dim={LAYER_DIMS[HIDDEN_LAYER]}"
            )
        if spec.softmax_dim not in (None, LAYER_DIMS[SOFTMAX_LAYER]):
            raise DataError(
                f"on-disk score vectors require softmax_dim={LAYER_DIMS[SOFTMAX_LAYER]}"
            )
    result = build_synthetic(spec)
    corpus = result.corpus

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    truth_lines = []
    for profile in corpus.profiles.values():
        truth_lines.append(f"{profile.id}:::{profile.gender.value}:::{profile.age.value}\n")
        docs = "".join(
            f"    <document><![CDATA[{tweet}]]></document>\n" for tweet in profile.tweets
        )
        xml = f"<author>\n  <documents>\n{docs}  </documents>\n</author>\n"
        (root / f"{profile.id}.xml").write_text(xml, encoding="utf-8")
    (root / "truth.txt").write_text("".join(truth_lines), encoding="utf-8")

    manifest_lines = ["image_id,profile_id,source,path\n"]
    source_token = {Source.TWEETED: "tweet", Source.RETWEETED: "retweet"}
    for image in corpus.images.values():
        manifest_lines.append(
            f"{image.id},{image.profile_id},{source_token[image.source]},{image.path or ''}\n"
        )
    (root / "images.csv").write_text("".join(manifest_lines), encoding="utf-8")

    if embeddings_path is not None:
        def records():
            for layer in (HIDDEN_LAYER, SOFTMAX_LAYER):
                for image_id, values in result.store.iter_layer(layer):
                    yield image_id, layer, values
        write_embeddings_jsonl(records(), embeddings_path)

    return result


def chance_level_spec(seed: int, **overrides) -> SynthSpec:
    """A no-signal spec variant for chance-level controls."""
    base = SynthSpec(
        text_signal="none", image_signal="none", separation=0.0,
        text_marker_rate=0.0, seed=seed,
    )
    return replace(base, **overrides)
