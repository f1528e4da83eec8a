"""Optional neural inference: embed images with a pre-trained network.

This capability is not required anywhere else in the package; embeddings
normally arrive through the JSONL file format. When used, the model is an
ONNX classification network exposing two outputs: the penultimate activations
(one row per image) and the final class scores. Images are resized to 224x224
and the stated per-channel means are subtracted; no crop, RGB channel order.
Bit-compatibility with any particular training pipeline is not claimed.

The runtime dependencies (onnxruntime, Pillow) are probed at call time; a
missing runtime raises CapabilityUnavailable before any image is touched.
Tests can inject a stub session through ``session_factory``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import CapabilityUnavailable, DataError
from .visfeat import EmbeddingVector, HIDDEN_LAYER, LAYER_DIMS, SOFTMAX_LAYER

# RGB channel means of the standard VGG ImageNet preprocessing.
DEFAULT_CHANNEL_MEANS = (123.68, 116.779, 103.939)
INPUT_SIZE = 224


class InferenceSession(Protocol):
    def run_batch(self, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(hidden activations, class scores), one row per input image."""
        ...


@dataclass
class ExtractionResult:
    vectors: list[EmbeddingVector]
    errors: list[tuple[str, str]]  # (image id, message)


def preprocess_image(path: str | Path,
                     channel_means: Sequence[float] = DEFAULT_CHANNEL_MEANS) -> np.ndarray:
    """Decode, resize to 224x224, subtract channel means; returns CHW float32."""
    try:
        from PIL import Image
    except ImportError:
        raise CapabilityUnavailable(
            "image preprocessing requires Pillow (install the 'extract' extra)"
        ) from None
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB").resize((INPUT_SIZE, INPUT_SIZE), Image.BILINEAR)
    except Exception as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from None
    arr = np.asarray(rgb, dtype=np.float32)  # HWC
    arr -= np.asarray(channel_means, dtype=np.float32)
    return arr.transpose(2, 0, 1)


class _OnnxSession:
    """Wraps an onnxruntime session; the model must expose exactly two
    outputs, penultimate activations first, class scores second."""

    def __init__(self, model_path: str | Path) -> None:
        try:
            import onnxruntime
        except ImportError:
            raise CapabilityUnavailable(
                "neural inference requires onnxruntime (install the 'extract' extra)"
            ) from None
        self._session = onnxruntime.InferenceSession(str(model_path))
        outputs = self._session.get_outputs()
        if len(outputs) != 2:
            raise DataError(
                f"model must expose 2 outputs (activations, scores), found {len(outputs)}"
            )
        self._input_name = self._session.get_inputs()[0].name
        self._output_names = [o.name for o in outputs]

    def run_batch(self, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        hidden, scores = self._session.run(self._output_names, {self._input_name: batch})
        return np.asarray(hidden), np.asarray(scores)


def extract_embeddings(
    network: str | Path,
    images: Sequence[tuple[str, str | Path]],
    session_factory: Callable[[str | Path], InferenceSession] | None = None,
    channel_means: Sequence[float] = DEFAULT_CHANNEL_MEANS,
    batch_size: int = 16,
) -> ExtractionResult:
    """Embed (image_id, path) pairs; per-image decode failures become error
    records and the batch continues. The runtime is probed up front."""
    factory = session_factory or _OnnxSession
    session = factory(network)

    vectors: list[EmbeddingVector] = []
    errors: list[tuple[str, str]] = []
    pending: list[tuple[str, np.ndarray]] = []

    def flush() -> None:
        if not pending:
            return
        batch = np.stack([arr for _, arr in pending])
        hidden, scores = session.run_batch(batch)
        if hidden.shape != (len(pending), LAYER_DIMS[HIDDEN_LAYER]):
            raise DataError(
                f"model activations have shape {hidden.shape}, expected "
                f"({len(pending)}, {LAYER_DIMS[HIDDEN_LAYER]})"
            )
        if scores.shape != (len(pending), LAYER_DIMS[SOFTMAX_LAYER]):
            raise DataError(
                f"model scores have shape {scores.shape}, expected "
                f"({len(pending)}, {LAYER_DIMS[SOFTMAX_LAYER]})"
            )
        for (image_id, _), h, s in zip(pending, hidden, scores):
            vectors.append(EmbeddingVector(image_id=image_id, layer=HIDDEN_LAYER,
                                           values=h.astype(np.float32)))
            vectors.append(EmbeddingVector(image_id=image_id, layer=SOFTMAX_LAYER,
                                           values=s.astype(np.float32)))
        pending.clear()

    for image_id, path in images:
        try:
            pending.append((image_id, preprocess_image(path, channel_means)))
        except DataError as exc:
            errors.append((image_id, str(exc)))
            continue
        if len(pending) >= batch_size:
            flush()
    flush()
    return ExtractionResult(vectors=vectors, errors=errors)
