"""Command-line exporter: populate an embedding store from input texts.

Reads texts from dataset files and/or pending-texts manifests (JSONL rows
with a ``"text"`` field; manifest rows also carry the text's ``"sha256"``,
which is verified), embeds every text not already present in the store,
and appends the vectors keyed by SHA-256 of the UTF-8 text::

    lagonn-export --model dummy:64 --in pending.jsonl --store store.bin

Exit status 0 on success, 1 on any error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

from .models import ModelLoadError, load_model
from .store import StoreError, StoreWriter, text_key


class InputError(ValueError):
    """Raised for unreadable or malformed input rows."""


def read_texts(paths) -> list[str]:
    """All texts from JSONL files, in order, duplicates preserved."""
    texts: list[str] = []
    for path in paths:
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc}") from None
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: bad JSON: {exc}") from None
            if not isinstance(row, dict) or not isinstance(row.get("text"), str):
                raise InputError(
                    f"{path}:{lineno}: expected an object with a string 'text' field"
                )
            text = row["text"]
            claimed = row.get("sha256")
            if claimed is not None:
                actual = hashlib.sha256(text.encode("utf-8")).hexdigest()
                if claimed != actual:
                    raise InputError(
                        f"{path}:{lineno}: sha256 {claimed} does not match"
                        f" the row's text (got {actual})"
                    )
            texts.append(text)
    return texts


def run_export(model_id: str, inputs, store_path: str, batch: int):
    """Embed and append all new texts; returns (written, skipped, dim)."""
    if batch < 1:
        raise InputError(f"--batch must be >= 1, got {batch}")
    model = load_model(model_id)
    texts = read_texts(inputs)
    if not texts:
        raise InputError("no input texts")
    writer = StoreWriter(store_path, model.dim)
    fresh: list[tuple[bytes, str]] = []
    seen: set[bytes] = set()
    skipped = 0
    for text in texts:
        key = text_key(text)
        if key in writer or key in seen:
            skipped += 1
            continue
        seen.add(key)
        fresh.append((key, text))
    for start in range(0, len(fresh), batch):
        chunk = fresh[start : start + batch]
        vectors = model.encode_batch([text for _, text in chunk])
        for (key, _), vec in zip(chunk, vectors):
            writer.add(key, vec)
    writer.commit()
    return writer.added, skipped, model.dim


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lagonn-export",
        description="Embed texts and append them to an embedding-store file.",
    )
    parser.add_argument(
        "--model", required=True,
        help="dummy:<dim> or a sentence-transformers model id",
    )
    parser.add_argument(
        "--in", dest="inputs", nargs="+", required=True, metavar="FILE",
        help="dataset and/or pending-manifest JSONL files",
    )
    parser.add_argument(
        "--store", required=True,
        help="embedding-store path (created when absent)",
    )
    parser.add_argument(
        "--batch", type=int, default=32, help="texts embedded per model call"
    )
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if not exc.code else 1
    try:
        written, skipped, dim = run_export(
            args.model, args.inputs, args.store, args.batch
        )
    except (InputError, ModelLoadError, StoreError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"{args.store}: dim {dim}, {written} embedding(s) written,"
        f" {skipped} already present"
    )
    return 0
