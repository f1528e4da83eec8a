"""The neural extractor is an optional capability: its inference contract is
tested through an injected stub session with hand-computable outputs, so no
neural runtime is required. Real-runtime wiring is covered only when
onnxruntime happens to be installed."""

import numpy as np
import pytest

from viprof.errors import CapabilityUnavailable, DataError
from viprof.extract import (
    DEFAULT_CHANNEL_MEANS, INPUT_SIZE, extract_embeddings, preprocess_image,
)
from viprof.visfeat import HIDDEN_LAYER, LAYER_DIMS, SOFTMAX_LAYER

PIL = pytest.importorskip("PIL.Image")


def write_image(path, color, size=(32, 48)):
    PIL.new("RGB", size, color=color).save(path)
    return path


class StubSession:
    """Analytically verifiable network: activation k = mean of channel k%3 of
    the preprocessed input; score j = activation j (truncated/padded)."""

    def __init__(self, model_path):
        self.model_path = model_path

    def run_batch(self, batch):
        n = batch.shape[0]
        channel_means = batch.astype(np.float64).mean(axis=(2, 3))  # (n, 3)
        hidden = np.zeros((n, LAYER_DIMS[HIDDEN_LAYER]), dtype=np.float32)
        for k in range(LAYER_DIMS[HIDDEN_LAYER]):
            hidden[:, k] = channel_means[:, k % 3]
        scores = np.abs(hidden[:, : LAYER_DIMS[SOFTMAX_LAYER]])
        return hidden, scores


class TestPreprocess:
    def test_constant_color_resize_and_mean_subtraction(self, tmp_path):
        path = write_image(tmp_path / "c.png", (200, 116, 10))
        arr = preprocess_image(path)
        assert arr.shape == (3, INPUT_SIZE, INPUT_SIZE)
        expected = np.array([200, 116, 10], dtype=np.float32) - \
            np.array(DEFAULT_CHANNEL_MEANS, dtype=np.float32)
        for channel in range(3):
            assert np.allclose(arr[channel], expected[channel], atol=1e-4)

    def test_corrupt_file_rejected(self, tmp_path):
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"this is not an image")
        with pytest.raises(DataError, match="cannot decode"):
            preprocess_image(bad)


class TestExtractWithStub:
    def test_constant_image_analytic_output(self, tmp_path):
        path = write_image(tmp_path / "c.png", (200, 116, 10))
        result = extract_embeddings("stub.onnx", [("img1", path)],
                                    session_factory=StubSession)
        assert not result.errors
        by_layer = {v.layer: v for v in result.vectors}
        # Channel means after preprocessing are exactly color - channel_mean.
        expected = np.array([200, 116, 10], dtype=np.float32) - \
            np.array(DEFAULT_CHANNEL_MEANS, dtype=np.float32)
        hidden = by_layer[HIDDEN_LAYER].values
        assert hidden.shape == (4096,)
        assert np.allclose(hidden[:3], expected, atol=1e-3)
        assert np.allclose(hidden[3:6], expected, atol=1e-3)
        scores = by_layer[SOFTMAX_LAYER].values
        assert np.allclose(scores[:3], np.abs(expected), atol=1e-3)

    def test_empty_image_list(self):
        result = extract_embeddings("stub.onnx", [], session_factory=StubSession)
        assert result.vectors == [] and result.errors == []

    def test_corrupt_file_among_three(self, tmp_path):
        good1 = write_image(tmp_path / "a.png", (10, 10, 10))
        bad = tmp_path / "b.png"
        bad.write_bytes(b"junk")
        good2 = write_image(tmp_path / "c.png", (50, 60, 70))
        result = extract_embeddings(
            "stub.onnx", [("a", good1), ("b", bad), ("c", good2)],
            session_factory=StubSession)
        assert {v.image_id for v in result.vectors} == {"a", "c"}
        assert len(result.vectors) == 4  # two layers per good image
        assert len(result.errors) == 1
        assert result.errors[0][0] == "b"

    def test_batching(self, tmp_path):
        paths = [("i%d" % j, write_image(tmp_path / f"{j}.png", (j, j, j)))
                 for j in range(5)]
        result = extract_embeddings("stub.onnx", paths,
                                    session_factory=StubSession, batch_size=2)
        assert len(result.vectors) == 10

    def test_bad_output_shape_rejected(self, tmp_path):
        class WrongShape(StubSession):
            def run_batch(self, batch):
                hidden, scores = super().run_batch(batch)
                return hidden[:, :100], scores

        path = write_image(tmp_path / "c.png", (1, 2, 3))
        with pytest.raises(DataError, match="activations have shape"):
            extract_embeddings("stub.onnx", [("i", path)], session_factory=WrongShape)


class TestCapabilityGate:
    def test_missing_runtime_fails_at_startup(self, tmp_path, monkeypatch):
        import builtins
        real_import = builtins.__import__

        def no_onnxruntime(name, *args, **kwargs):
            if name == "onnxruntime":
                raise ImportError("No module named 'onnxruntime'")
            return real_import(name, *args, **kwargs)

        monkeypatch.setattr(builtins, "__import__", no_onnxruntime)
        with pytest.raises(CapabilityUnavailable, match="onnxruntime"):
            extract_embeddings(tmp_path / "net.onnx", [("i", tmp_path / "x.png")])
