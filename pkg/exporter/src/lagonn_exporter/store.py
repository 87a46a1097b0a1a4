"""Append-only access to embedding-store files.

File layout (little-endian): magic ``LGNEMB1``, uint32 dimension, then one
record per text — a 32-byte SHA-256 key followed by ``dim`` float32
values. The key is the SHA-256 digest of the UTF-8 text a reader will
look up.

Appends preserve existing record bytes verbatim and commit by writing a
temporary file and renaming it over the target, so a store is never left
half-written and re-running an export is byte-idempotent.
"""

from __future__ import annotations

import hashlib
import os
import struct

import numpy as np

STORE_MAGIC = b"LGNEMB1"
_DIM = struct.Struct("<I")
HEADER_SIZE = len(STORE_MAGIC) + _DIM.size


class StoreError(ValueError):
    """Raised when a store file is structurally invalid or incompatible."""


def text_key(text: str) -> bytes:
    """32-byte SHA-256 digest of the UTF-8 text: the store's record key."""
    return hashlib.sha256(text.encode("utf-8")).digest()


def _parse(blob: bytes, origin: str) -> tuple[int, dict[bytes, int]]:
    """Validate a store blob; return (dim, key -> record offset)."""
    if blob[: len(STORE_MAGIC)] != STORE_MAGIC:
        raise StoreError(f"{origin}: bad magic, not an embedding store")
    if len(blob) < HEADER_SIZE:
        raise StoreError(f"{origin}: truncated header")
    (dim,) = _DIM.unpack_from(blob, len(STORE_MAGIC))
    if dim < 1:
        raise StoreError(f"{origin}: dimension must be >= 1, got {dim}")
    record = 32 + 4 * dim
    if (len(blob) - HEADER_SIZE) % record:
        raise StoreError(f"{origin}: truncated record at end of file")
    offsets: dict[bytes, int] = {}
    for off in range(HEADER_SIZE, len(blob), record):
        key = blob[off : off + 32]
        if key in offsets:
            raise StoreError(f"{origin}: duplicate key {key.hex()}")
        offsets[key] = off
    return dim, offsets


def read_store(path: str) -> tuple[int, dict[bytes, np.ndarray]]:
    """Load a store file into (dim, key -> float32 vector)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    dim, offsets = _parse(blob, path)
    vectors = {
        key: np.frombuffer(blob, dtype="<f4", count=dim, offset=off + 32)
        for key, off in offsets.items()
    }
    return dim, vectors


class StoreWriter:
    """Accumulates deduplicated records onto a (possibly new) store file."""

    def __init__(self, path: str, dim: int) -> None:
        if dim < 1:
            raise StoreError(f"store dimension must be >= 1, got {dim}")
        self.path = path
        self.dim = dim
        self.added = 0
        if os.path.exists(path):
            with open(path, "rb") as fh:
                blob = fh.read()
            found, offsets = _parse(blob, path)
            if found != dim:
                raise StoreError(
                    f"{path}: store dimension {found} does not match"
                    f" model dimension {dim}"
                )
            self._blob = bytearray(blob)
            self._keys = set(offsets)
        else:
            self._blob = bytearray(STORE_MAGIC + _DIM.pack(dim))
            self._keys = set()

    def __contains__(self, key: bytes) -> bool:
        return key in self._keys

    def add(self, key: bytes, vec: np.ndarray) -> bool:
        """Buffer one record; returns False when the key already exists."""
        if len(key) != 32:
            raise StoreError("store keys must be 32-byte SHA-256 digests")
        if key in self._keys:
            return False
        arr = np.asarray(vec)
        if arr.shape != (self.dim,):
            raise StoreError(
                f"vector shape {arr.shape} does not match store dimension {self.dim}"
            )
        arr = arr.astype("<f4", copy=False)
        if not np.all(np.isfinite(arr)):
            raise StoreError("store vectors must be finite")
        self._blob += key + arr.tobytes()
        self._keys.add(key)
        self.added += 1
        return True

    def commit(self) -> None:
        """Atomically publish the current contents."""
        tmp = f"{self.path}.tmp.{os.getpid()}"
        with open(tmp, "wb") as fh:
            fh.write(self._blob)
        os.replace(tmp, self.path)
