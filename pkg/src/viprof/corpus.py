"""Corpus data model, PAN-style ingestion, and descriptive statistics.

A corpus is one language's worth of author profiles: each profile carries a
gender label, an age-range label, the author's tweets, and references to the
images the author posted (split into tweeted vs. retweeted). Ingestion reads
three artifacts from a corpus directory:

  truth.txt    one ``id:::GENDER:::AGERANGE`` line per author
  <id>.xml     ``<author><documents><document>...</document></documents></author>``
  images.csv   header ``image_id,profile_id,source,path``; source is
               ``tweet`` or ``retweet``; path may be empty
"""

from __future__ import annotations

import csv
import enum
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

LANGUAGES = ("EN", "SP")
TASKS = ("age", "gender")


class Gender(enum.Enum):
    FEMALE = "female"
    MALE = "male"

    @classmethod
    def parse(cls, token: str) -> "Gender":
        try:
            return cls(token.strip().lower())
        except ValueError:
            raise DataError(f"unknown gender token {token!r}") from None


class AgeRange(enum.Enum):
    A18_24 = "18-24"
    A25_34 = "25-34"
    A35_49 = "35-49"
    A50_64 = "50-64"
    A65_N = "65-N"

    @classmethod
    def parse(cls, token: str) -> "AgeRange":
        normalized = token.strip().upper().replace("--", "-")
        for member in cls:
            if member.value.upper() == normalized:
                return member
        raise DataError(f"unknown age token {token!r}")


class Source(enum.Enum):
    TWEETED = "tweeted"
    RETWEETED = "retweeted"

    @classmethod
    def parse(cls, token: str) -> "Source":
        # Manifest rows use the short tokens; the enum keeps the long names.
        mapping = {"tweet": cls.TWEETED, "retweet": cls.RETWEETED}
        try:
            return mapping[token.strip().lower()]
        except KeyError:
            raise DataError(f"unknown source token {token!r}") from None


SOURCE_FILTERS = ("all", "tweeted", "retweeted")


@dataclass(frozen=True)
class Profile:
    id: str
    language: str
    gender: Gender
    age: AgeRange
    tweets: tuple[str, ...]
    images: tuple[str, ...]

    def label(self, task: str) -> str:
        if task == "age":
            return self.age.value
        if task == "gender":
            return self.gender.value
        raise DataError(f"unknown task {task!r}")


@dataclass(frozen=True)
class ImageRecord:
    id: str
    profile_id: str
    source: Source
    path: str | None = None


@dataclass(frozen=True)
class LoadSummary:
    n_profiles: int
    n_images: int
    profiles_without_images: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "n_profiles": self.n_profiles,
            "n_images": self.n_images,
            "profiles_without_images": list(self.profiles_without_images),
        }


@dataclass(frozen=True)
class Corpus:
    """Immutable after construction; safe to share across threads."""

    language: str
    profiles: dict[str, Profile]
    images: dict[str, ImageRecord]
    summary: LoadSummary | None = None

    def __post_init__(self) -> None:
        if self.language not in LANGUAGES:
            raise DataError(f"unknown language {self.language!r}")
        for image in self.images.values():
            if image.profile_id not in self.profiles:
                raise DataError(
                    f"dangling profile_id {image.profile_id!r} for image {image.id!r}"
                )
        for profile in self.profiles.values():
            for image_id in profile.images:
                if image_id not in self.images:
                    raise DataError(
                        f"profile {profile.id!r} references unknown image {image_id!r}"
                    )

    def image_ids(self, profile_id: str, source_filter: str = "all") -> list[str]:
        """Image ids of a profile, optionally restricted to one source."""
        if source_filter not in SOURCE_FILTERS:
            raise DataError(f"unknown source filter {source_filter!r}")
        ids = self.profiles[profile_id].images
        if source_filter == "all":
            return list(ids)
        return [i for i in ids if self.images[i].source.value == source_filter]

    def has_source(self, source: str) -> bool:
        return any(img.source.value == source for img in self.images.values())


def parse_truth_file(text: str) -> list[tuple[str, Gender, AgeRange]]:
    """Parse ``id:::gender:::agerange`` lines; order preserved, blanks skipped."""
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(":::")
        if len(fields) != 3:
            raise DataError(
                f"expected 3 ':::'-separated fields at line {lineno}, got {len(fields)}"
            )
        pid, gender_tok, age_tok = fields
        try:
            gender = Gender.parse(gender_tok)
        except DataError:
            raise DataError(f"unknown gender token at line {lineno}: {gender_tok!r}") from None
        try:
            age = AgeRange.parse(age_tok)
        except DataError:
            raise DataError(f"unknown age token at line {lineno}: {age_tok!r}") from None
        records.append((pid, gender, age))
    return records


def serialize_truth(records: list[tuple[str, Gender, AgeRange]]) -> str:
    return "".join(f"{pid}:::{g.value}:::{a.value}\n" for pid, g, a in records)


def _parse_author_xml(path: Path) -> tuple[str, ...]:
    try:
        tree = ET.parse(path)
    except (ET.ParseError, OSError) as exc:
        raise DataError(f"unreadable author file {path}: {exc}") from None
    documents = tree.getroot().findall(".//document")
    return tuple("".join(doc.itertext()) for doc in documents)


def _read_manifest(path: Path) -> list[tuple[str, str, Source, str | None]]:
    rows = []
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"unreadable manifest {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["image_id", "profile_id", "source", "path"]:
            raise DataError(f"manifest {path} must start with header image_id,profile_id,source,path")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise DataError(f"manifest {path} line {lineno}: expected 4 columns, got {len(row)}")
            image_id, profile_id, source_tok, img_path = (c.strip() for c in row)
            try:
                source = Source.parse(source_tok)
            except DataError as exc:
                raise DataError(f"manifest {path} line {lineno}: {exc}") from None
            rows.append((image_id, profile_id, source, img_path or None))
    return rows


def load_corpus(root: str | Path, language: str) -> Corpus:
    """Read truth.txt, per-author XML files, and images.csv into a linked Corpus.

    Profiles listed in truth.txt but lacking an XML file are an error; profiles
    with no manifest rows are kept with an empty image list and counted in the
    load summary.
    """
    root = Path(root)
    language = language.upper()
    truth_path = root / "truth.txt"
    try:
        truth_text = truth_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"unreadable truth file {truth_path}: {exc}") from None
    truth = parse_truth_file(truth_text)

    seen: set[str] = set()
    for pid, _, _ in truth:
        if pid in seen:
            raise DataError(f"duplicate profile id {pid!r} in {truth_path}")
        seen.add(pid)

    manifest = _read_manifest(root / "images.csv")

    images_by_profile: dict[str, list[str]] = {pid: [] for pid, _, _ in truth}
    images: dict[str, ImageRecord] = {}
    for image_id, profile_id, source, img_path in manifest:
        if image_id in images:
            raise DataError(f"duplicate image_id {image_id!r} in manifest")
        if profile_id not in images_by_profile:
            raise DataError(f"dangling profile_id {profile_id!r} in manifest row {image_id!r}")
        images[image_id] = ImageRecord(id=image_id, profile_id=profile_id, source=source, path=img_path)
        images_by_profile[profile_id].append(image_id)

    profiles: dict[str, Profile] = {}
    empty: list[str] = []
    for pid, gender, age in truth:
        xml_path = root / f"{pid}.xml"
        if not xml_path.exists():
            raise DataError(f"author file missing for profile {pid!r}: {xml_path}")
        tweets = _parse_author_xml(xml_path)
        image_ids = tuple(images_by_profile[pid])
        if not image_ids:
            empty.append(pid)
        profiles[pid] = Profile(
            id=pid, language=language, gender=gender, age=age,
            tweets=tweets, images=image_ids,
        )

    summary = LoadSummary(
        n_profiles=len(profiles), n_images=len(images),
        profiles_without_images=tuple(empty),
    )
    return Corpus(language=language, profiles=profiles, images=images, summary=summary)


# --- descriptive statistics -------------------------------------------------

@dataclass(frozen=True)
class GroupImageStats:
    """Image-count statistics over one group of profiles.

    Standard deviation is population (divide by N). Mean/std fields are None
    when the group is empty, and omitted from JSON.
    """

    n_profiles: int
    tweeted_total: int
    retweeted_total: int
    mean_by_profile: float | None
    std_by_profile: float | None
    mean_tweeted: float | None
    std_tweeted: float | None
    mean_retweeted: float | None
    std_retweeted: float | None

    @property
    def images_total(self) -> int:
        return self.tweeted_total + self.retweeted_total

    def to_json_dict(self) -> dict:
        out: dict = {
            "n_profiles": self.n_profiles,
            "images_total": self.images_total,
            "tweeted_total": self.tweeted_total,
            "retweeted_total": self.retweeted_total,
        }
        for key in ("mean_by_profile", "std_by_profile", "mean_tweeted",
                    "std_tweeted", "mean_retweeted", "std_retweeted"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass(frozen=True)
class StatsReport:
    language: str
    overall: GroupImageStats
    by_age: dict[str, GroupImageStats]
    by_gender: dict[str, GroupImageStats]

    def to_json_dict(self) -> dict:
        return {
            "language": self.language,
            "overall": self.overall.to_json_dict(),
            "by_age": {k: v.to_json_dict() for k, v in self.by_age.items()},
            "by_gender": {k: v.to_json_dict() for k, v in self.by_gender.items()},
        }

    def to_markdown(self) -> str:
        return render_stats_markdown(self)


def _mean_std(counts: list[int]) -> tuple[float | None, float | None]:
    # fsum keeps the result identical under any profile ordering.
    if not counts:
        return None, None
    n = len(counts)
    mean = math.fsum(counts) / n
    var = math.fsum((c - mean) ** 2 for c in counts) / n
    return mean, math.sqrt(var)


def _group_stats(corpus: Corpus, profile_ids: list[str]) -> GroupImageStats:
    per_profile, per_tweeted, per_retweeted = [], [], []
    for pid in profile_ids:
        tweeted = len(corpus.image_ids(pid, "tweeted"))
        retweeted = len(corpus.image_ids(pid, "retweeted"))
        per_profile.append(tweeted + retweeted)
        per_tweeted.append(tweeted)
        per_retweeted.append(retweeted)
    mean_p, std_p = _mean_std(per_profile)
    mean_t, std_t = _mean_std(per_tweeted)
    mean_r, std_r = _mean_std(per_retweeted)
    return GroupImageStats(
        n_profiles=len(profile_ids),
        tweeted_total=sum(per_tweeted),
        retweeted_total=sum(per_retweeted),
        mean_by_profile=mean_p, std_by_profile=std_p,
        mean_tweeted=mean_t, std_tweeted=std_t,
        mean_retweeted=mean_r, std_retweeted=std_r,
    )


def corpus_stats(corpus: Corpus) -> StatsReport:
    """Counts plus per-profile image-count means and population stds, overall
    and broken down by age range and by gender."""
    all_ids = list(corpus.profiles)
    by_age = {
        age.value: _group_stats(corpus, [p for p in all_ids if corpus.profiles[p].age is age])
        for age in AgeRange
    }
    by_gender = {
        g.value: _group_stats(corpus, [p for p in all_ids if corpus.profiles[p].gender is g])
        for g in Gender
    }
    return StatsReport(
        language=corpus.language,
        overall=_group_stats(corpus, all_ids),
        by_age=by_age,
        by_gender=by_gender,
    )


def _cell(mean: float | None, std: float | None) -> str:
    if mean is None:
        return "—"
    return f"{mean:.0f} (±{std:.0f})"


def render_stats_markdown(report: StatsReport) -> str:
    """Three tables: general counts, per age range, per gender."""
    lines = [f"## General statistics ({report.language})", ""]
    o = report.overall
    lines += [
        "| | " + report.language + " |",
        "|---|---|",
        f"| Profiles used | {o.n_profiles} |",
        f"| Images tweeted | {o.tweeted_total} |",
        f"| Images retweeted | {o.retweeted_total} |",
        f"| Average images by profile | {_cell(o.mean_by_profile, o.std_by_profile)} |",
        f"| Average images in tweet set | {_cell(o.mean_tweeted, o.std_tweeted)} |",
        f"| Average images in retweet set | {_cell(o.mean_retweeted, o.std_retweeted)} |",
        "",
        "## By age range",
        "",
        "| ages | # | by profile | in tweets | in retweets |",
        "|---|---|---|---|---|",
    ]
    for label, g in report.by_age.items():
        lines.append(
            f"| {label} | {g.n_profiles} | {_cell(g.mean_by_profile, g.std_by_profile)} "
            f"| {_cell(g.mean_tweeted, g.std_tweeted)} | {_cell(g.mean_retweeted, g.std_retweeted)} |"
        )
    lines += [
        "",
        "## By gender",
        "",
        "| gender | # | by profile | in tweets | in retweets |",
        "|---|---|---|---|---|",
    ]
    for label, g in report.by_gender.items():
        lines.append(
            f"| {label} | {g.n_profiles} | {_cell(g.mean_by_profile, g.std_by_profile)} "
            f"| {_cell(g.mean_tweeted, g.std_tweeted)} | {_cell(g.mean_retweeted, g.std_retweeted)} |"
        )
    return "\n".join(lines) + "\n"


# --- JSON snapshot ----------------------------------------------------------

def corpus_to_json(corpus: Corpus) -> dict:
    out = {
        "language": corpus.language,
        "profiles": [
            {
                "id": p.id,
                "gender": p.gender.value,
                "age": p.age.value,
                "tweets": list(p.tweets),
                "images": list(p.images),
            }
            for p in corpus.profiles.values()
        ],
        "images": [
            {"id": i.id, "profile_id": i.profile_id, "source": i.source.value, "path": i.path}
            for i in corpus.images.values()
        ],
    }
    if corpus.summary is not None:
        out["summary"] = corpus.summary.to_json_dict()
    return out


def corpus_from_json(doc: dict) -> Corpus:
    try:
        language = doc["language"]
        profiles = {}
        for p in doc["profiles"]:
            profiles[p["id"]] = Profile(
                id=p["id"], language=language,
                gender=Gender.parse(p["gender"]), age=AgeRange.parse(p["age"]),
                tweets=tuple(p["tweets"]), images=tuple(p["images"]),
            )
        images = {}
        for i in doc["images"]:
            images[i["id"]] = ImageRecord(
                id=i["id"], profile_id=i["profile_id"],
                source=Source(i["source"]), path=i.get("path"),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed corpus snapshot: {exc}") from None
    summary = None
    if "summary" in doc:
        s = doc["summary"]
        summary = LoadSummary(
            n_profiles=s["n_profiles"], n_images=s["n_images"],
            profiles_without_images=tuple(s["profiles_without_images"]),
        )
    return Corpus(language=language, profiles=profiles, images=images, summary=summary)
