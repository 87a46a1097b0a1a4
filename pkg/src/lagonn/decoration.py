"""Neighbor-information text decoration.

An input text is rewritten by appending, after a separator token, the
nearest training neighbor's gold label name and Euclidean distance, and
optionally the neighbor's text:

- ``LABEL``: ``original [SEP] [name distance]``
- ``TEXT``:  ``original [SEP] [name distance] neighbor text``
- ``BOTH``:  one TEXT-format segment per label, ascending label id

Training rows exclude themselves from retrieval (effectively querying the
second-nearest neighbor of the joint set); test inputs retrieve over all
rows. Each decoration keeps the hits it cited so downstream code can audit
self-exclusion and derive synthetic embeddings without re-parsing strings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .data import LabeledExample, LabelMap, render_input
from .neighbors import NeighborHit, NeighborIndex

MODES = ("LABEL", "TEXT", "BOTH")


class DecorationError(ValueError):
    """Raised for invalid decorator configuration or unusable indexes."""


@dataclass(frozen=True)
class DecoratorConfig:
    """How decorations are rendered."""

    mode: str = "LABEL"
    separator: str = "[SEP]"
    distance_decimals: int = 1

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise DecorationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.separator:
            raise DecorationError("separator must be non-empty")
        if self.distance_decimals < 0:
            raise DecorationError("distance_decimals must be non-negative")


@dataclass(frozen=True)
class DecoratedExample:
    """A rewritten input plus the retrieval evidence that produced it.

    ``label`` is the gold label for training rows and None for test
    inputs; ``hits`` are the cited neighbors in appended-segment order.
    """

    id: int | None
    original_text: str
    decorated_text: str
    label: int | None
    hits: tuple[NeighborHit, ...]


def format_segment(
    hit: NeighborHit, label_map: LabelMap, mode: str, config: DecoratorConfig
) -> str:
    """Render one appended segment for a retrieved neighbor."""
    if mode not in MODES:
        raise DecorationError(f"mode must be one of {MODES}, got {mode!r}")
    name = label_map.name(hit.label)
    distance = format(hit.distance, f".{config.distance_decimals}f")
    head = f"{config.separator} [{name} {distance}]"
    if mode == "LABEL":
        return head
    return f"{head} {hit.text}"


def _retrieve(
    text: str,
    index: NeighborIndex,
    encoder,
    config: DecoratorConfig,
    exclude: int | None,
) -> list[NeighborHit]:
    vector = encoder.encode(text)
    if config.mode in ("LABEL", "TEXT"):
        return index.query(vector, k=1, exclude=exclude)
    per_label = index.nearest_per_label(vector, exclude=exclude)
    return [per_label[label] for label in sorted(per_label)]


def assemble_decorated(
    original: str,
    hits: Sequence[NeighborHit],
    label_map: LabelMap,
    config: DecoratorConfig,
) -> str:
    """Join the original text with one rendered segment per hit.

    This is the single assembly path used by both decorate functions; it
    also lets callers build decorations from hand-injected hits.
    """
    segment_mode = "TEXT" if config.mode == "BOTH" else config.mode
    parts = [original]
    parts.extend(format_segment(hit, label_map, segment_mode, config) for hit in hits)
    return " ".join(parts)


def decorate_train(
    example: LabeledExample,
    index: NeighborIndex,
    encoder,
    config: DecoratorConfig,
    label_map: LabelMap,
) -> DecoratedExample:
    """Decorate a training row, excluding itself from retrieval.

    In BOTH mode a label whose only row is the example itself simply
    contributes no segment, so extreme class imbalance stays runnable.
    """
    if config.mode in ("LABEL", "TEXT") and index.size < 2:
        raise DecorationError(f"{config.mode} decoration needs at least 2 training rows")
    original = render_input(example, config.separator)
    hits = _retrieve(original, index, encoder, config, exclude=example.id)
    return DecoratedExample(
        id=example.id,
        original_text=original,
        decorated_text=assemble_decorated(original, hits, label_map, config),
        label=example.label,
        hits=tuple(hits),
    )


def decorate_test(
    text: str,
    index: NeighborIndex,
    encoder,
    config: DecoratorConfig,
    label_map: LabelMap,
) -> DecoratedExample:
    """Decorate an inference input; all training rows are eligible."""
    if index.size < 1:
        raise DecorationError("cannot decorate against an empty index")
    hits = _retrieve(text, index, encoder, config, exclude=None)
    return DecoratedExample(
        id=None,
        original_text=text,
        decorated_text=assemble_decorated(text, hits, label_map, config),
        label=None,
        hits=tuple(hits),
    )
