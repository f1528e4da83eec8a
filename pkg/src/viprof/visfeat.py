"""Per-image CNN representations and per-profile visual prototypes.

Embeddings arrive through a JSON-lines file, one record per line:

    {"image_id": "...", "layer": "hidden4096"|"softmax1000", "values": [...]}

`hidden4096` vectors (penultimate-layer activations) represent images for
classification; `softmax1000` vectors (final class scores) feed only the
qualitative category analysis. File records must match the layer's canonical
length exactly. In-memory stores built programmatically (e.g. synthetic test
data) only need per-layer consistency, so desk-scale experiments can use small
dimensions.

Values are stored as float32, matching the on-disk format; averaging
accumulates in float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .corpus import Corpus, Profile
from .errors import DataError
from .textfeat import SparseVector

HIDDEN_LAYER = "hidden4096"
SOFTMAX_LAYER = "softmax1000"
LAYER_DIMS = {HIDDEN_LAYER: 4096, SOFTMAX_LAYER: 1000}


@dataclass(frozen=True)
class EmbeddingVector:
    """One file-format record; length must match the layer tag exactly."""

    image_id: str
    layer: str
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.layer not in LAYER_DIMS:
            raise DataError(f"unknown layer tag {self.layer!r}")
        values = np.asarray(self.values, dtype=np.float32)
        expected = LAYER_DIMS[self.layer]
        if values.ndim != 1 or len(values) != expected:
            raise DataError(
                f"layer {self.layer} requires exactly {expected} values, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise DataError(f"non-finite values in embedding for image {self.image_id!r}")
        if self.layer == SOFTMAX_LAYER and np.any(values < 0):
            raise DataError(f"negative score in softmax vector for image {self.image_id!r}")
        object.__setattr__(self, "values", values)


class EmbeddingStore:
    """Maps (image_id, layer) to a vector; immutable by convention after load.

    Within a layer all vectors share one length; duplicates are rejected.
    """

    def __init__(self) -> None:
        self._layers: dict[str, dict[str, np.ndarray]] = {}
        self._dims: dict[str, int] = {}

    def add(self, image_id: str, layer: str, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float32)
        if values.ndim != 1:
            raise DataError(f"embedding for {image_id!r} must be a flat vector")
        if not np.all(np.isfinite(values)):
            raise DataError(f"non-finite values in embedding for image {image_id!r}")
        per_layer = self._layers.setdefault(layer, {})
        if image_id in per_layer:
            raise DataError(f"duplicate embedding for image {image_id!r}, layer {layer}")
        dim = self._dims.get(layer)
        if dim is None:
            self._dims[layer] = len(values)
        elif len(values) != dim:
            raise DataError(
                f"dimension mismatch in layer {layer}: expected {dim}, got {len(values)}"
                f" for image {image_id!r}"
            )
        per_layer[image_id] = values

    def add_record(self, record: EmbeddingVector) -> None:
        self.add(record.image_id, record.layer, record.values)

    def get(self, image_id: str, layer: str = HIDDEN_LAYER) -> np.ndarray | None:
        return self._layers.get(layer, {}).get(image_id)

    def has(self, image_id: str, layer: str = HIDDEN_LAYER) -> bool:
        return image_id in self._layers.get(layer, {})

    def dim(self, layer: str = HIDDEN_LAYER) -> int | None:
        return self._dims.get(layer)

    def count(self, layer: str = HIDDEN_LAYER) -> int:
        return len(self._layers.get(layer, {}))

    def iter_layer(self, layer: str) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._layers.get(layer, {}).items())


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Read a JSONL embedding file; errors carry the offending line number."""
    store = EmbeddingStore()
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"unreadable embedding file {path}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                record = EmbeddingVector(
                    image_id=doc["image_id"], layer=doc["layer"],
                    values=np.asarray(doc["values"], dtype=np.float32),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path} line {lineno}: malformed record: {exc}") from None
            except DataError as exc:
                raise DataError(f"{path} line {lineno}: {exc}") from None
            try:
                store.add_record(record)
            except DataError as exc:
                raise DataError(f"{path} line {lineno}: {exc}") from None
    return store


def write_embeddings_jsonl(
    records: Iterable[tuple[str, str, np.ndarray]], path: str | Path
) -> None:
    """Write (image_id, layer, values) triples as JSONL, float32 on disk."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for image_id, layer, values in records:
            values32 = np.asarray(values, dtype=np.float32)
            doc = {
                "image_id": image_id,
                "layer": layer,
                "values": [float(v) for v in values32],
            }
            fh.write(json.dumps(doc) + "\n")
    tmp.replace(path)


@dataclass(frozen=True)
class Prototype:
    """Componentwise mean of a profile's hidden-layer vectors.

    Zero selected images yield a zero vector flagged degenerate, so profiles
    are never dropped from the comparison population.
    """

    profile_id: str
    values: np.ndarray
    image_count: int
    source_filter: str
    degenerate: bool

    @property
    def dimension(self) -> int:
        return len(self.values)


def build_prototype(
    profile: Profile,
    corpus: Corpus,
    store: EmbeddingStore,
    source_filter: str = "all",
    layer: str = HIDDEN_LAYER,
) -> Prototype:
    """Average the profile's embeddings for the filtered images.

    Images without a stored embedding are skipped; image_count is the number
    actually averaged. Accumulation is float64.
    """
    selected = []
    for image_id in corpus.image_ids(profile.id, source_filter):
        vec = store.get(image_id, layer)
        if vec is not None:
            selected.append(vec)
    dim = store.dim(layer) or 0
    if not selected:
        return Prototype(
            profile_id=profile.id, values=np.zeros(dim, dtype=np.float64),
            image_count=0, source_filter=source_filter, degenerate=True,
        )
    acc = np.zeros(dim, dtype=np.float64)
    for vec in selected:
        acc += vec.astype(np.float64)
    return Prototype(
        profile_id=profile.id, values=acc / len(selected),
        image_count=len(selected), source_filter=source_filter, degenerate=False,
    )


def concat_multimodal(
    bow: SparseVector, proto: Prototype, l2_blocks: bool = False
) -> np.ndarray:
    """BoW block first, then the visual block; no rescaling by default.

    With l2_blocks=True each block is L2-normalized independently; a zero
    block stays zero.
    """
    text_block = bow.to_dense()
    visual_block = np.asarray(proto.values, dtype=np.float64)
    if l2_blocks:
        tn = np.linalg.norm(text_block)
        if tn > 0:
            text_block = text_block / tn
        vn = np.linalg.norm(visual_block)
        if vn > 0:
            visual_block = visual_block / vn
    return np.concatenate([text_block, visual_block])


def prototypes_to_jsonl(protos: Iterable[Prototype], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for proto in protos:
            doc = {
                "profile_id": proto.profile_id,
                "image_count": proto.image_count,
                "source_filter": proto.source_filter,
                "degenerate": proto.degenerate,
                "values": [float(v) for v in proto.values],
            }
            fh.write(json.dumps(doc) + "\n")
    tmp.replace(path)
