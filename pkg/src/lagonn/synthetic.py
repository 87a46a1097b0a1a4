"""Separable synthetic corpus + aligned embedding store for smoke tests.

Each class gets an orthonormal centroid direction; every example's stored
vector is ``normalize(margin * centroid + unit_noise)``. A margin above 2
therefore guarantees linear separability (the noise bound is 1). Texts are
token-templated — a class anchor token repeated six times plus a unique
id token — so the feature-hashing encoder also separates the classes
without the store. Texts, labels, and vectors are emitted as dataset
JSONL files plus an embedding-store file; decorated-text vectors are not
stored because the synthetic store provider derives them by rule
(0.7 * original + 0.3 * cited neighbor, renormalized).
"""

from __future__ import annotations

import os

import numpy as np

from .data import LabeledExample, LabelMap, save_dataset, save_label_map
from .encoders import EmbeddingStore, normalize, text_key
from .rng import SplitMix64Stream, fnv1a64, mix64


class SyntheticConfigError(ValueError):
    """Raised for unusable synthetic-corpus parameters."""


def _uniform_vector(stream: SplitMix64Stream, dim: int) -> np.ndarray:
    return np.array([2.0 * stream.uniform() - 1.0 for _ in range(dim)])


def _orthonormal_centroids(stream: SplitMix64Stream, classes: int, dim: int) -> np.ndarray:
    centroids = np.zeros((classes, dim))
    made = 0
    while made < classes:
        candidate = _uniform_vector(stream, dim)
        for prior in centroids[:made]:
            candidate -= (candidate @ prior) * prior
        norm = float(np.linalg.norm(candidate))
        if norm < 1e-6:
            continue  # nearly dependent draw; reject and redraw
        centroids[made] = candidate / norm
        made += 1
    return centroids


def make_synthetic(
    per_class: int,
    classes: int,
    dim: int,
    margin: float,
    seed: int,
    out_dir: str,
    test_per_class: int = 50,
) -> dict[str, str]:
    """Write train.jsonl, test.jsonl, labels.jsonl, and store.bin.

    Returns the mapping of logical name -> path. Deterministic: identical
    arguments produce byte-identical files.
    """
    if classes < 2:
        raise SyntheticConfigError("need at least 2 classes")
    if dim < classes:
        raise SyntheticConfigError(f"dim {dim} must be >= classes {classes}")
    if margin <= 0:
        raise SyntheticConfigError("margin must be positive")
    if per_class < 1 or test_per_class < 1:
        raise SyntheticConfigError("per-class counts must be >= 1")

    stream = SplitMix64Stream(mix64(seed ^ fnv1a64(b"synthetic-corpus")))
    centroids = _orthonormal_centroids(stream, classes, dim)
    store = EmbeddingStore(dim)
    splits: dict[str, list[LabeledExample]] = {}
    for split, count in (("train", per_class), ("test", test_per_class)):
        examples = []
        for cls in range(classes):
            anchor = " ".join([f"topic{cls}"] * 6)
            for i in range(count):
                text = f"{anchor} item {split}{cls}x{i}"
                examples.append(
                    LabeledExample(id=len(examples), text=text, label=cls)
                )
                noise = normalize(_uniform_vector(stream, dim))
                vector = normalize(margin * centroids[cls] + noise)
                store.put(text_key(text), vector.astype(np.float32))
        splits[split] = examples

    os.makedirs(out_dir, exist_ok=True)
    label_map = LabelMap(tuple(f"class{c}" for c in range(classes)))
    paths = {
        "train": os.path.join(out_dir, "train.jsonl"),
        "test": os.path.join(out_dir, "test.jsonl"),
        "labels": os.path.join(out_dir, "labels.jsonl"),
        "store": os.path.join(out_dir, "store.bin"),
    }
    save_dataset(paths["train"], splits["train"])
    save_dataset(paths["test"], splits["test"])
    save_label_map(paths["labels"], label_map)
    store.save(paths["store"])
    return paths
