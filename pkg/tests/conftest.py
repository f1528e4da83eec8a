import numpy as np
import pytest

from viprof.corpus import AgeRange, Corpus, Gender, ImageRecord, Profile, Source


def make_profile(pid, gender="female", age="25-34", tweets=(), images=(), language="EN"):
    return Profile(
        id=pid, language=language,
        gender=Gender.parse(gender), age=AgeRange.parse(age),
        tweets=tuple(tweets), images=tuple(images),
    )


def make_corpus(profile_specs, language="EN"):
    """profile_specs: list of dicts accepted by make_profile plus an optional
    'image_sources' list aligned with generated image ids."""
    profiles, images = {}, {}
    for spec in profile_specs:
        sources = spec.pop("image_sources", [])
        pid = spec["id"]
        image_ids = []
        for j, source in enumerate(sources):
            image_id = f"{pid}_img{j}"
            images[image_id] = ImageRecord(
                id=image_id, profile_id=pid, source=Source(source))
            image_ids.append(image_id)
        profiles[pid] = make_profile(
            spec["id"], spec.get("gender", "female"), spec.get("age", "25-34"),
            spec.get("tweets", ()), image_ids, language)
    return Corpus(language=language, profiles=profiles, images=images)


def write_corpus_dir(root, truth_text, author_docs, manifest_rows):
    """author_docs: {pid: [tweet, ...]}; manifest_rows: list of 4-tuples."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "truth.txt").write_text(truth_text, encoding="utf-8")
    for pid, docs in author_docs.items():
        body = "".join(f"<document><![CDATA[{d}]]></document>" for d in docs)
        (root / f"{pid}.xml").write_text(
            f"<author><documents>{body}</documents></author>", encoding="utf-8")
    lines = ["image_id,profile_id,source,path\n"]
    lines += [f"{i},{p},{s},{path}\n" for i, p, s, path in manifest_rows]
    (root / "images.csv").write_text("".join(lines), encoding="utf-8")
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
