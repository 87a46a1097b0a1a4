"""Dataset schema, JSONL ingestion, and input-text rendering.

Datasets are line-delimited JSON, one record per line with keys ``text``
(required, non-empty), ``text_pair`` (optional second sentence) and
``label`` (required integer). Label maps are line-delimited JSON records
``{"id": <int>, "name": <str>}`` with contiguous ids starting at 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence


class DatasetError(ValueError):
    """Raised for malformed datasets, label maps, or render arguments."""


@dataclass(frozen=True)
class LabelMap:
    """Mapping from contiguous integer label ids to unique display names."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) < 2:
            raise DatasetError("label map must define at least two labels")
        if any(not isinstance(n, str) or not n for n in self.names):
            raise DatasetError("label names must be non-empty strings")
        if len(set(self.names)) != len(self.names):
            raise DatasetError("label names must be unique")

    @property
    def num_labels(self) -> int:
        return len(self.names)

    def name(self, label: int) -> str:
        if not 0 <= label < len(self.names):
            raise DatasetError(f"label id {label} outside [0, {len(self.names)})")
        return self.names[label]


@dataclass(frozen=True)
class LabeledExample:
    """One classified text, optionally a sentence pair.

    ``id`` is the example's position in its dataset and doubles as the
    self-exclusion key for train-time neighbor queries.
    """

    id: int
    text: str
    label: int
    text_pair: str | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise DatasetError(f"example {self.id}: text must be non-empty")
        if self.text_pair == "":
            object.__setattr__(self, "text_pair", None)


@dataclass(frozen=True)
class LabeledDataset:
    """Immutable list of examples with positional ids plus their label map."""

    examples: tuple[LabeledExample, ...]
    label_map: LabelMap

    def __post_init__(self) -> None:
        if not self.examples:
            raise DatasetError("dataset must contain at least one example")
        for pos, ex in enumerate(self.examples):
            if ex.id != pos:
                raise DatasetError(f"example at position {pos} has id {ex.id}")
            if not 0 <= ex.label < self.label_map.num_labels:
                raise DatasetError(
                    f"example {pos}: label {ex.label} not in label map"
                )

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def labels(self) -> list[int]:
        return [ex.label for ex in self.examples]


def render_input(example: LabeledExample, separator: str) -> str:
    """Flatten an example to the single string that gets embedded.

    Sentence pairs render context first: ``"{text_pair} {separator} {text}"``;
    single sentences render as ``text`` alone.
    """
    if not separator:
        raise DatasetError("separator must be non-empty")
    if example.text_pair is None:
        return example.text
    return f"{example.text_pair} {separator} {example.text}"


def _read_jsonl(path: str) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise DatasetError(f"{path}:{lineno}: record must be an object")
            yield lineno, record


def load_label_map(path: str) -> LabelMap:
    """Read a JSONL label map, enforcing contiguous ids from 0."""
    entries: dict[int, str] = {}
    for lineno, record in _read_jsonl(path):
        try:
            label_id, name = record["id"], record["name"]
        except KeyError as exc:
            raise DatasetError(f"{path}:{lineno}: missing key {exc}") from exc
        if not isinstance(label_id, int) or isinstance(label_id, bool):
            raise DatasetError(f"{path}:{lineno}: id must be an integer")
        if label_id in entries:
            raise DatasetError(f"{path}:{lineno}: duplicate id {label_id}")
        entries[label_id] = name
    if sorted(entries) != list(range(len(entries))):
        raise DatasetError(f"{path}: label ids must be contiguous from 0")
    return LabelMap(tuple(entries[i] for i in range(len(entries))))


def save_label_map(path: str, label_map: LabelMap) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label_id, name in enumerate(label_map.names):
            fh.write(json.dumps({"id": label_id, "name": name}) + "\n")


def load_dataset(path: str, label_map: LabelMap) -> LabeledDataset:
    """Read a JSONL dataset, assigning positional ids in file order."""
    examples: list[LabeledExample] = []
    for lineno, record in _read_jsonl(path):
        if "text" not in record or "label" not in record:
            raise DatasetError(f"{path}:{lineno}: record needs 'text' and 'label'")
        text, label = record["text"], record["label"]
        if not isinstance(text, str):
            raise DatasetError(f"{path}:{lineno}: text must be a string")
        if not isinstance(label, int) or isinstance(label, bool):
            raise DatasetError(f"{path}:{lineno}: label must be an integer")
        if not 0 <= label < label_map.num_labels:
            raise DatasetError(f"{path}:{lineno}: unknown label {label}")
        pair = record.get("text_pair")
        if pair is not None and not isinstance(pair, str):
            raise DatasetError(f"{path}:{lineno}: text_pair must be a string")
        try:
            examples.append(
                LabeledExample(id=len(examples), text=text, label=label, text_pair=pair)
            )
        except DatasetError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    if not examples:
        raise DatasetError(f"{path}: dataset is empty")
    return LabeledDataset(tuple(examples), label_map)


def save_dataset(path: str, examples: Sequence[LabeledExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            record: dict = {"text": ex.text, "label": ex.label}
            if ex.text_pair is not None:
                record["text_pair"] = ex.text_pair
            fh.write(json.dumps(record) + "\n")


def subset_dataset(dataset: LabeledDataset, ids: Sequence[int]) -> LabeledDataset:
    """New dataset from selected ids, re-numbered positionally in order."""
    picked = []
    for new_id, old_id in enumerate(ids):
        src = dataset.examples[old_id]
        picked.append(
            LabeledExample(id=new_id, text=src.text, label=src.label, text_pair=src.text_pair)
        )
    return LabeledDataset(tuple(picked), dataset.label_map)
