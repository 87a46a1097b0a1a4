"""Trainable linear adapter over frozen base embeddings.

A dim x dim matrix W, initialized at identity so an untrained adapter is a
no-op, is fit by full-batch gradient descent on a contrastive cosine pair
loss: mean over sampled pairs of ``(cos(W x_i, W x_j) - target)^2`` with
target 1.0 for same-label pairs and 0.0 for different-label pairs. This is
the package's lightweight stand-in for fine-tuning a sentence encoder;
schedules deciding *when* it trains live in the pipeline module.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import accel
from .rng import SplitMix64Stream

ADAPTER_MAGIC = b"LGNADP1"


class ContrastiveError(ValueError):
    """Raised when pair generation is impossible (one label only)."""


class DivergenceError(FloatingPointError):
    """Adapter training produced a non-finite loss or gradient."""


@dataclass(frozen=True)
class TrainingPair:
    """Indices into the embedding matrix plus the cosine target."""

    i: int
    j: int
    target: float

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise ValueError("pair endpoints must differ")
        if self.target not in (0.0, 1.0):
            raise ValueError(f"target must be 0.0 or 1.0, got {self.target}")


@dataclass(frozen=True)
class AdapterConfig:
    """Hyperparameters for one adapter fit."""

    pairs_per_example: int = 20
    epochs: int = 10
    learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.pairs_per_example <= 0 or self.pairs_per_example % 2 != 0:
            raise ValueError("pairs_per_example must be a positive even integer")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class AdapterState:
    """A trained (or identity) adapter matrix."""

    W: np.ndarray

    def __post_init__(self) -> None:
        W = np.asarray(self.W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"adapter must be square, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise ValueError("adapter entries must be finite")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "AdapterState":
        return cls(np.eye(dim))

    def save(self, path: str) -> None:
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "wb") as fh:
            fh.write(ADAPTER_MAGIC)
            fh.write(struct.pack("<I", self.dim))
            fh.write(self.W.astype("<f4").tobytes(order="C"))
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> "AdapterState":
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[: len(ADAPTER_MAGIC)] != ADAPTER_MAGIC:
            raise ValueError(f"{path}: bad magic, not an adapter file")
        (dim,) = struct.unpack_from("<I", blob, len(ADAPTER_MAGIC))
        body = blob[len(ADAPTER_MAGIC) + 4 :]
        if len(body) != 4 * dim * dim:
            raise ValueError(f"{path}: expected {dim}x{dim} float32 matrix")
        W = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(dim, dim)
        return cls(W)


def generate_pairs(
    labels: Sequence[int], pairs_per_example: int, rng: SplitMix64Stream
) -> list[TrainingPair]:
    """Sample contrastive pairs, deterministically given the stream state.

    For each index i in ascending order: ``R/2`` positive partners drawn
    uniformly with replacement from the other same-label indices (none if
    i's label is a singleton), then exactly ``R/2`` negative partners drawn
    from the different-label indices.
    """
    if pairs_per_example <= 0 or pairs_per_example % 2 != 0:
        raise ValueError("pairs_per_example must be a positive even integer")
    n = len(labels)
    if n < 2:
        raise ContrastiveError("contrastive training undefined: need at least 2 examples")
    if len(set(labels)) < 2:
        raise ContrastiveError("contrastive training undefined: all examples share one label")
    by_label: dict[int, list[int]] = {}
    for idx, label in enumerate(labels):
        by_label.setdefault(label, []).append(idx)
    # ascending-index candidate lists, shared across examples of a label
    diff_lists = {
        label: [j for j in range(n) if labels[j] != label] for label in by_label
    }
    position = {label: {j: p for p, j in enumerate(members)} for label, members in by_label.items()}
    half = pairs_per_example // 2
    pairs: list[TrainingPair] = []
    for i, label in enumerate(labels):
        same = by_label[label]
        if len(same) > 1:
            # draw from the ascending same-label list with index i removed
            pos = position[label][i]
            for _ in range(half):
                draw = rng.bounded(len(same) - 1)
                j = same[draw] if draw < pos else same[draw + 1]
                pairs.append(TrainingPair(i, j, 1.0))
        diff = diff_lists[label]
        for _ in range(half):
            pairs.append(TrainingPair(i, diff[rng.bounded(len(diff))], 0.0))
    return pairs


def _pair_arrays(pairs: Sequence[TrainingPair]):
    idx_i = np.array([p.i for p in pairs], dtype=np.int64)
    idx_j = np.array([p.j for p in pairs], dtype=np.int64)
    targets = np.array([p.target for p in pairs], dtype=np.float64)
    return idx_i, idx_j, targets


def pair_loss(W: np.ndarray, X: np.ndarray, pairs: Sequence[TrainingPair]) -> float:
    """Mean squared cosine error over the pairs under adapter W."""
    if not pairs:
        raise ValueError("pair list must be non-empty")
    idx_i, idx_j, targets = _pair_arrays(pairs)
    return accel.pair_loss(
        np.ascontiguousarray(W, dtype=np.float64),
        np.ascontiguousarray(X, dtype=np.float64),
        idx_i,
        idx_j,
        targets,
    )


def pair_loss_grad(W: np.ndarray, X: np.ndarray, pairs: Sequence[TrainingPair]):
    """(loss, dloss/dW) over the pairs under adapter W."""
    if not pairs:
        raise ValueError("pair list must be non-empty")
    idx_i, idx_j, targets = _pair_arrays(pairs)
    return accel.pair_loss_grad(
        np.ascontiguousarray(W, dtype=np.float64),
        np.ascontiguousarray(X, dtype=np.float64),
        idx_i,
        idx_j,
        targets,
    )


def train_adapter(
    X: np.ndarray, labels: Sequence[int], config: AdapterConfig
) -> AdapterState:
    """Fit the adapter from identity by full-batch gradient descent.

    Loss evaluations are tracked so the returned matrix never scores worse
    than identity: if the post-training loss exceeds the initial loss, the
    best-seen intermediate is returned instead.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, dim = X.shape
    if len(labels) != n:
        raise ValueError("labels length must match embedding rows")
    rng = SplitMix64Stream(config.seed)
    pairs = generate_pairs(list(labels), config.pairs_per_example, rng)
    idx_i, idx_j, targets = _pair_arrays(pairs)

    W = np.eye(dim)
    if config.epochs == 0:
        return AdapterState(W)

    initial = accel.pair_loss(W, X, idx_i, idx_j, targets)
    if not np.isfinite(initial):
        raise DivergenceError("divergence: non-finite initial loss")
    best_W, best_loss = W.copy(), initial
    for _ in range(config.epochs):
        loss, grad = accel.pair_loss_grad(W, X, idx_i, idx_j, targets)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError("divergence: non-finite loss or gradient")
        if loss < best_loss:
            best_W, best_loss = W.copy(), loss
        W = W - config.learning_rate * grad
    final = accel.pair_loss(W, X, idx_i, idx_j, targets)
    if not np.isfinite(final):
        raise DivergenceError("divergence: non-finite final loss")
    if final <= initial:
        return AdapterState(W)
    return AdapterState(best_W)
