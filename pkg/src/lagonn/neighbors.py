"""Exact brute-force Euclidean nearest-neighbor search.

Distances are computed from explicit coordinate differences (never the
expanded ``||a||^2 - 2ab + ||b||^2`` form) so identical vectors always give
an exact 0.0 and ties are reproducible. Ties break by ascending row id.
Row ids double as dataset example ids, which makes train-time
self-exclusion a simple id filter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import accel


@dataclass(frozen=True)
class NeighborHit:
    """One retrieved neighbor: its row id, Euclidean distance, label, text."""

    id: int
    distance: float
    label: int
    text: str


class NeighborIndex:
    """Immutable index over the embeddings of rendered training texts."""

    def __init__(
        self,
        vectors: np.ndarray,
        labels: Sequence[int],
        texts: Sequence[str],
    ) -> None:
        vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] < 1:
            raise ValueError("index needs a non-empty 2-D vector matrix")
        if len(labels) != vectors.shape[0] or len(texts) != vectors.shape[0]:
            raise ValueError("vectors, labels, and texts must have equal length")
        self.vectors = vectors
        self.labels = np.asarray(labels, dtype=np.int64)
        self.texts = tuple(texts)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def _sqdists(self, v: np.ndarray) -> np.ndarray:
        v = np.ascontiguousarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"query dim {v.shape} does not match index dim {self.dim}")
        return accel.sqdist_matrix(v[None, :], self.vectors)[0]

    def _hit(self, row: int, sqdist: float) -> NeighborHit:
        return NeighborHit(
            id=int(row),
            distance=float(np.sqrt(sqdist)),
            label=int(self.labels[row]),
            text=self.texts[row],
        )

    def query(self, v: np.ndarray, k: int, exclude: int | None = None) -> list[NeighborHit]:
        """The k nearest rows by (distance, id), never returning ``exclude``."""
        eligible = self.size - (1 if exclude is not None else 0)
        if not 1 <= k <= eligible:
            raise ValueError(f"k={k} out of range for {eligible} eligible rows")
        sqd = self._sqdists(v)
        order = np.lexsort((np.arange(self.size), sqd))
        hits = []
        for row in order:
            if exclude is not None and row == exclude:
                continue
            hits.append(self._hit(row, sqd[row]))
            if len(hits) == k:
                break
        return hits

    def nearest_per_label(
        self, v: np.ndarray, exclude: int | None = None
    ) -> dict[int, NeighborHit]:
        """Nearest eligible row of each label; empty classes are absent."""
        sqd = self._sqdists(v)
        order = np.lexsort((np.arange(self.size), sqd))
        found: dict[int, NeighborHit] = {}
        remaining = len(set(self.labels.tolist()))
        for row in order:
            if exclude is not None and row == exclude:
                continue
            label = int(self.labels[row])
            if label not in found:
                found[label] = self._hit(row, sqd[row])
                remaining -= 1
                if remaining == 0:
                    break
        return found


def build_index(encoder, texts: Sequence[str], labels: Sequence[int]) -> NeighborIndex:
    """Embed rendered texts with ``encoder`` and index the result."""
    vectors = np.stack([encoder.encode(t) for t in texts])
    return NeighborIndex(vectors, labels, texts)
