"""Classification heads over (possibly decorated) embeddings.

Two heads: multinomial logistic regression trained from scratch by
full-batch gradient descent with Armijo backtracking line search, and a
k-nearest-neighbor voting head. Both are deterministic and produce a
per-label score row usable by ranking metrics (for logistic regression the
softmax probabilities; for kNN the vote fractions).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import accel
from .neighbors import NeighborIndex

_ARMIJO_C = 1e-4
_MIN_STEP = 1e-20


class HeadFitError(ValueError):
    """Raised when a head cannot be fit on the given data."""


@dataclass(frozen=True)
class LogRegModel:
    """Fitted multinomial logistic regression."""

    weights: np.ndarray  # (num_labels, dim)
    biases: np.ndarray  # (num_labels,)
    l2_strength: float
    iterations: int
    final_grad_norm: float

    @property
    def num_labels(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def fit_logreg(
    X: np.ndarray,
    y: Sequence[int],
    l2_strength: float = 1.0,
    max_iters: int = 1000,
    tol: float = 1e-6,
    num_labels: int | None = None,
) -> LogRegModel:
    """Minimize mean cross-entropy + (l2/2n)*||W||^2 (biases unpenalized).

    Full-batch gradient descent; each iteration backtracks the step until
    the Armijo sufficient-decrease condition holds. Stops when the gradient
    infinity-norm drops below ``tol``, on ``max_iters``, or when no step
    makes progress.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise HeadFitError("X rows and y length must match")
    if l2_strength < 0:
        raise HeadFitError("l2_strength must be non-negative")
    present = np.unique(y)
    if present.size < 2:
        raise HeadFitError("single-class input: need at least two present labels")
    if num_labels is None:
        num_labels = int(present.max()) + 1
    if present.min() < 0 or present.max() >= num_labels:
        raise HeadFitError("labels outside [0, num_labels)")
    if X.shape[0] < num_labels:
        raise HeadFitError("need at least as many examples as labels")

    W = np.zeros((num_labels, X.shape[1]))
    b = np.zeros(num_labels)
    lam = float(l2_strength)
    loss, grad_w, grad_b = accel.logreg_loss_grad(W, b, X, y, lam)
    iterations = 0
    for _ in range(max_iters):
        grad_norm = max(float(np.abs(grad_w).max()), float(np.abs(grad_b).max()))
        if grad_norm < tol:
            break
        grad_sq = float(np.sum(grad_w * grad_w) + np.sum(grad_b * grad_b))
        step = 1.0
        while step >= _MIN_STEP:
            trial_w = W - step * grad_w
            trial_b = b - step * grad_b
            if accel.logreg_loss(trial_w, trial_b, X, y, lam) <= loss - _ARMIJO_C * step * grad_sq:
                break
            step *= 0.5
        if step < _MIN_STEP:
            break
        W, b = trial_w, trial_b
        loss, grad_w, grad_b = accel.logreg_loss_grad(W, b, X, y, lam)
        if not np.isfinite(loss):
            raise HeadFitError("non-finite loss during head fitting")
        iterations += 1
    final_norm = max(float(np.abs(grad_w).max()), float(np.abs(grad_b).max()))
    W.setflags(write=False)
    b.setflags(write=False)
    return LogRegModel(W, b, lam, iterations, final_norm)


def predict_proba(model: LogRegModel, X: np.ndarray) -> np.ndarray:
    """Softmax probability rows, one per input row."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ValueError(f"input dim {X.shape} does not match model dim {model.dim}")
    return accel.logreg_probs(model.weights, model.biases, X)


@dataclass(frozen=True)
class KnnHeadModel:
    """Voting head over stored embeddings; scores are vote fractions."""

    index: NeighborIndex
    num_labels: int
    k: int = 3

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.index.size:
            raise HeadFitError(f"k={self.k} out of range for {self.index.size} rows")


def fit_knn(
    X: np.ndarray, y: Sequence[int], num_labels: int, k: int = 3
) -> KnnHeadModel:
    """Store the training embeddings and labels for voting."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    index = NeighborIndex(X, list(y), [""] * X.shape[0])
    return KnnHeadModel(index=index, num_labels=num_labels, k=k)


def knn_predict(model: KnnHeadModel, v: np.ndarray) -> tuple[int, np.ndarray]:
    """Majority vote among the k nearest rows.

    Vote ties break by the smaller summed distance of the tied label's
    voters, then by the smaller label id.
    """
    hits = model.index.query(v, k=model.k)
    votes = np.zeros(model.num_labels)
    summed = np.zeros(model.num_labels)
    for hit in hits:
        votes[hit.label] += 1.0
        summed[hit.label] += hit.distance
    top = votes.max()
    tied = [label for label in range(model.num_labels) if votes[label] == top]
    winner = min(tied, key=lambda label: (summed[label], label))
    return winner, votes / model.k


def knn_predict_batch(model: KnnHeadModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vote-fraction score rows and predicted labels for each input row."""
    X = np.asarray(X, dtype=np.float64)
    scores = np.empty((X.shape[0], model.num_labels))
    preds = np.empty(X.shape[0], dtype=np.int64)
    for row in range(X.shape[0]):
        label, fractions = knn_predict(model, X[row])
        preds[row] = label
        scores[row] = fractions
    return scores, preds
