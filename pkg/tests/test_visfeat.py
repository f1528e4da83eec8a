import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from viprof.errors import DataError
from viprof.textfeat import SparseVector
from viprof.visfeat import (
    EmbeddingStore, EmbeddingVector, HIDDEN_LAYER, SOFTMAX_LAYER,
    build_prototype, concat_multimodal, load_embeddings, write_embeddings_jsonl,
)

from conftest import make_corpus


def small_store(vectors, layer=HIDDEN_LAYER):
    store = EmbeddingStore()
    for image_id, values in vectors.items():
        store.add(image_id, layer, np.asarray(values, dtype=np.float32))
    return store


class TestEmbeddingVector:
    def test_canonical_lengths_enforced(self):
        EmbeddingVector("i", HIDDEN_LAYER, np.zeros(4096, dtype=np.float32))
        with pytest.raises(DataError, match="4096"):
            EmbeddingVector("i", HIDDEN_LAYER, np.zeros(4095, dtype=np.float32))
        with pytest.raises(DataError, match="1000"):
            EmbeddingVector("i", SOFTMAX_LAYER, np.zeros(999, dtype=np.float32))

    def test_unknown_layer(self):
        with pytest.raises(DataError, match="layer"):
            EmbeddingVector("i", "pool5", np.zeros(10, dtype=np.float32))

    def test_softmax_scores_non_negative(self):
        values = np.zeros(1000, dtype=np.float32)
        values[3] = -0.5
        with pytest.raises(DataError, match="negative"):
            EmbeddingVector("i", SOFTMAX_LAYER, values)

    def test_non_finite_rejected(self):
        values = np.zeros(4096, dtype=np.float32)
        values[0] = np.nan
        with pytest.raises(DataError, match="finite"):
            EmbeddingVector("i", HIDDEN_LAYER, values)


class TestEmbeddingStore:
    def test_duplicate_rejected(self):
        store = small_store({"i1": [1.0, 2.0]})
        with pytest.raises(DataError, match="duplicate"):
            store.add("i1", HIDDEN_LAYER, np.array([3.0, 4.0], dtype=np.float32))

    def test_layer_dimension_consistency(self):
        store = small_store({"i1": [1.0, 2.0]})
        with pytest.raises(DataError, match="dimension mismatch"):
            store.add("i2", HIDDEN_LAYER, np.array([1.0], dtype=np.float32))

    def test_layers_independent(self):
        store = small_store({"i1": [1.0, 2.0]})
        store.add("i1", SOFTMAX_LAYER, np.array([0.5, 0.5, 0.0], dtype=np.float32))
        assert store.dim(HIDDEN_LAYER) == 2
        assert store.dim(SOFTMAX_LAYER) == 3


class TestLoadEmbeddings:
    def write_lines(self, tmp_path, lines):
        path = tmp_path / "emb.jsonl"
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path

    def test_well_formed(self, tmp_path):
        lines = [
            json.dumps({"image_id": f"i{j}", "layer": HIDDEN_LAYER,
                        "values": [0.25] * 4096})
            for j in range(3)
        ]
        store = load_embeddings(self.write_lines(tmp_path, lines))
        assert store.count(HIDDEN_LAYER) == 3
        assert store.get("i1").dtype == np.float32

    def test_wrong_length_names_line(self, tmp_path):
        lines = [json.dumps({"image_id": "i0", "layer": HIDDEN_LAYER,
                             "values": [0.0] * 4095})]
        with pytest.raises(DataError, match="line 1"):
            load_embeddings(self.write_lines(tmp_path, lines))

    def test_duplicate_names_line(self, tmp_path):
        record = json.dumps({"image_id": "i0", "layer": HIDDEN_LAYER,
                             "values": [0.0] * 4096})
        with pytest.raises(DataError, match="line 2.*duplicate"):
            load_embeddings(self.write_lines(tmp_path, [record, record]))

    def test_malformed_json_names_line(self, tmp_path):
        with pytest.raises(DataError, match="line 1.*malformed"):
            load_embeddings(self.write_lines(tmp_path, ["{not json"]))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="unreadable"):
            load_embeddings(tmp_path / "absent.jsonl")

    def test_write_read_roundtrip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.normal(size=4096).astype(np.float32)
        path = tmp_path / "emb.jsonl"
        write_embeddings_jsonl([("i0", HIDDEN_LAYER, values)], path)
        store = load_embeddings(path)
        assert np.array_equal(store.get("i0"), values)


class TestPrototype:
    def corpus_two_images(self):
        return make_corpus([
            {"id": "u1", "image_sources": ["tweeted", "retweeted"]},
        ])

    def test_mean_of_two(self):
        corpus = self.corpus_two_images()
        store = small_store({"u1_img0": [0.0, 2.0], "u1_img1": [2.0, 0.0]})
        proto = build_prototype(corpus.profiles["u1"], corpus, store)
        assert proto.values.tolist() == [1.0, 1.0]
        assert proto.image_count == 2
        assert not proto.degenerate

    def test_single_vector_identity(self):
        corpus = make_corpus([{"id": "u1", "image_sources": ["tweeted"]}])
        store = small_store({"u1_img0": [0.5, -1.5, 3.0]})
        proto = build_prototype(corpus.profiles["u1"], corpus, store)
        assert np.allclose(proto.values, [0.5, -1.5, 3.0], atol=1e-7)

    def test_source_filter(self):
        corpus = self.corpus_two_images()
        store = small_store({"u1_img0": [0.0, 2.0], "u1_img1": [2.0, 0.0]})
        proto = build_prototype(corpus.profiles["u1"], corpus, store, "tweeted")
        assert proto.values.tolist() == [0.0, 2.0]
        assert proto.image_count == 1

    def test_no_images_after_filter_degenerate(self):
        corpus = make_corpus([{"id": "u1", "image_sources": ["tweeted"]}])
        store = small_store({"u1_img0": [1.0, 1.0]})
        proto = build_prototype(corpus.profiles["u1"], corpus, store, "retweeted")
        assert proto.degenerate
        assert proto.image_count == 0
        assert proto.values.tolist() == [0.0, 0.0]

    def test_missing_embeddings_skipped(self):
        corpus = make_corpus([{"id": "u1", "image_sources": ["tweeted", "tweeted"]}])
        store = small_store({"u1_img0": [4.0, 4.0]})
        proto = build_prototype(corpus.profiles["u1"], corpus, store)
        assert proto.image_count == 1
        assert proto.values.tolist() == [4.0, 4.0]

    @given(st.lists(st.lists(st.floats(-100, 100), min_size=3, max_size=3),
                    min_size=1, max_size=8),
           st.randoms(use_true_random=False))
    def test_permutation_invariance_and_bounds(self, vectors, rnd):
        corpus = make_corpus([
            {"id": "u1", "image_sources": ["tweeted"] * len(vectors)},
        ])
        ids = [f"u1_img{j}" for j in range(len(vectors))]
        store = small_store(dict(zip(ids, vectors)))
        proto = build_prototype(corpus.profiles["u1"], corpus, store)

        shuffled = list(zip(ids, vectors))
        rnd.shuffle(shuffled)
        store2 = small_store(dict(shuffled))
        proto2 = build_prototype(corpus.profiles["u1"], corpus, store2)
        assert np.array_equal(proto.values, proto2.values)

        as32 = np.asarray(vectors, dtype=np.float32).astype(np.float64)
        assert np.all(proto.values >= as32.min(axis=0) - 1e-9)
        assert np.all(proto.values <= as32.max(axis=0) + 1e-9)

    def test_copies_of_same_vector(self):
        corpus = make_corpus([{"id": "u1", "image_sources": ["tweeted"] * 7}])
        vec = [0.125, -2.5, 9.0]
        store = small_store({f"u1_img{j}": vec for j in range(7)})
        proto = build_prototype(corpus.profiles["u1"], corpus, store)
        assert np.allclose(proto.values, vec, atol=1e-9)


class TestConcat:
    def test_length_law(self):
        bow = SparseVector(dimension=2000, entries=((5, 1.0),))
        corpus = make_corpus([{"id": "u1", "image_sources": ["tweeted"]}])
        store = small_store({"u1_img0": list(np.ones(4096))})
        proto = build_prototype(corpus.profiles["u1"], corpus, store)
        assert len(concat_multimodal(bow, proto)) == 6096

    def test_zero_bow_block(self):
        bow = SparseVector(dimension=3, entries=())
        corpus = make_corpus([{"id": "u1", "image_sources": ["tweeted"]}])
        store = small_store({"u1_img0": [7.0, 8.0]})
        proto = build_prototype(corpus.profiles["u1"], corpus, store)
        assert concat_multimodal(bow, proto).tolist() == [0.0, 0.0, 0.0, 7.0, 8.0]

    def test_blocks_exact_without_normalization(self):
        bow = SparseVector(dimension=2, entries=((0, 3.0), (1, 4.0)))
        corpus = make_corpus([{"id": "u1", "image_sources": ["tweeted"]}])
        store = small_store({"u1_img0": [5.0]})
        proto = build_prototype(corpus.profiles["u1"], corpus, store)
        assert concat_multimodal(bow, proto).tolist() == [3.0, 4.0, 5.0]

    def test_per_block_l2(self):
        bow = SparseVector(dimension=2, entries=((0, 3.0), (1, 4.0)))
        corpus = make_corpus([{"id": "u1", "image_sources": ["tweeted"]}])
        store = small_store({"u1_img0": [5.0]})
        proto = build_prototype(corpus.profiles["u1"], corpus, store)
        fused = concat_multimodal(bow, proto, l2_blocks=True)
        assert fused[:2].tolist() == pytest.approx([0.6, 0.8])
        assert fused[2] == pytest.approx(1.0)

    def test_l2_zero_block_stays_zero(self):
        bow = SparseVector(dimension=2, entries=())
        corpus = make_corpus([{"id": "u1", "image_sources": []}])
        store = EmbeddingStore()
        proto = build_prototype(corpus.profiles["u1"], corpus, store)
        fused = concat_multimodal(bow, proto, l2_blocks=True)
        assert fused.tolist() == [0.0, 0.0]
