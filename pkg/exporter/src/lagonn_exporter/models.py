"""Embedding model backends for the exporter.

``dummy:<dim>`` maps each text to a fixed vector derived from the text's
SHA-256 digest — deterministic across platforms and runs, no downloads —
meant for tests and pipeline plumbing. Any other identifier is loaded as
a sentence-transformers model (for example
``sentence-transformers/paraphrase-mpnet-base-v2``).
"""

from __future__ import annotations

import hashlib

import numpy as np


class ModelLoadError(RuntimeError):
    """Raised when a model identifier cannot be resolved or loaded."""


def _digest_vector(text: str, dim: int) -> np.ndarray:
    """Expand sha256(text) into dim components, each uniform in (-1, 1)."""
    seed = hashlib.sha256(text.encode("utf-8")).digest()
    words: list[int] = []
    counter = 0
    while len(words) < dim:
        block = hashlib.sha256(seed + counter.to_bytes(4, "little")).digest()
        words.extend(
            int.from_bytes(block[i : i + 4], "little") for i in range(0, 32, 4)
        )
        counter += 1
    u = (np.array(words[:dim], dtype=np.float64) + 0.5) / 2.0**32
    return (2.0 * u - 1.0).astype(np.float32)


class DummyModel:
    """Deterministic digest-derived vectors; no external model involved."""

    def __init__(self, dim: int) -> None:
        if dim < 1:
            raise ModelLoadError(f"dummy model dimension must be >= 1, got {dim}")
        self.dim = dim

    def encode_batch(self, texts) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for row, text in enumerate(texts):
            out[row] = _digest_vector(text, self.dim)
        return out


class SentenceTransformerModel:
    """Adapts a sentence-transformers model to the exporter interface."""

    def __init__(self, model) -> None:
        self._model = model
        dim = model.get_sentence_embedding_dimension()
        if not dim:
            probe = np.asarray(model.encode([""], convert_to_numpy=True))
            dim = probe.shape[1]
        self.dim = int(dim)

    def encode_batch(self, texts) -> np.ndarray:
        vectors = self._model.encode(
            list(texts),
            batch_size=len(texts),
            convert_to_numpy=True,
            show_progress_bar=False,
        )
        return np.asarray(vectors, dtype=np.float32)


def load_model(identifier: str):
    """Resolve an identifier to an object with ``.dim`` and ``.encode_batch``."""
    if identifier.startswith("dummy:"):
        suffix = identifier[len("dummy:"):]
        try:
            dim = int(suffix)
        except ValueError:
            raise ModelLoadError(f"bad dummy model dimension {suffix!r}") from None
        return DummyModel(dim)
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ModelLoadError(
            "sentence-transformers is not installed;"
            " only dummy:<dim> models are available"
        ) from exc
    try:
        return SentenceTransformerModel(SentenceTransformer(identifier))
    except Exception as exc:
        raise ModelLoadError(f"could not load model {identifier!r}: {exc}") from exc
