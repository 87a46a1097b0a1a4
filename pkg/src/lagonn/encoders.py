"""Text-to-unit-vector encoders behind a pluggable provider contract.

Providers are deterministic: identical text always yields an identical
vector whose L2 norm is 1 (or exactly 0 for token-less text). Built-ins:

- ``HashEncoder``: feature-hashing bag of words; lowercases, splits on
  non-alphanumeric runs, buckets each token by FNV-1a 64 mod dim,
  L2-normalizes the counts. Needs no external data.
- ``StoreEncoder``: looks vectors up in an :class:`EmbeddingStore` binary
  file keyed by SHA-256 of the text; missing texts raise
  :class:`MissingEmbedding` so callers can emit a pending-texts manifest.
- ``SyntheticStoreEncoder``: a store encoder that additionally derives
  vectors for decorated texts as ``0.7 * original + 0.3 * cited neighbor``
  renormalized, so synthetic-corpus runs never miss.
- ``AdaptedEncoder``: wraps any provider with a trained linear adapter,
  renormalizing the projected output.

Store file layout (little-endian): magic ``LGNEMB1``, uint32 dim, then
records of a 32-byte SHA-256 key followed by dim float32 values.
"""

from __future__ import annotations

import hashlib
import os
import re
import struct

import numpy as np

from .rng import fnv1a64

STORE_MAGIC = b"LGNEMB1"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class StoreFormatError(ValueError):
    """Raised when an embedding-store file is structurally invalid."""


class MissingEmbedding(KeyError):
    """A text's SHA-256 key is absent from the backing store."""

    def __init__(self, key_hex: str, text: str) -> None:
        super().__init__(key_hex)
        self.key_hex = key_hex
        self.text = text

    def __str__(self) -> str:
        return f"no stored embedding for sha256={self.key_hex}"


class MissingEmbeddings(KeyError):
    """Every store miss from one embedding pass, keyed by SHA-256 hex.

    Batch embedding collects all misses before failing so a single
    pending-texts manifest can list everything the pass needed, instead of
    surfacing one missing text per attempt.
    """

    def __init__(self, pending: dict[str, str]) -> None:
        super().__init__(", ".join(sorted(pending)))
        self.pending = dict(pending)

    def __str__(self) -> str:
        return f"{len(self.pending)} text(s) have no stored embedding"


def text_key(text: str) -> bytes:
    """32-byte SHA-256 digest of the UTF-8 text; the store's record key."""
    return hashlib.sha256(text.encode("utf-8")).digest()


def normalize(vec: np.ndarray) -> np.ndarray:
    """Return v / ||v||; the zero vector passes through unchanged."""
    out = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(out))
    if norm == 0.0:
        return out.copy()
    return out / norm


class EmbeddingStore:
    """In-memory image of an embedding-store file (key -> float32 vector)."""

    def __init__(self, dim: int, vectors: dict[bytes, np.ndarray] | None = None) -> None:
        if dim < 1:
            raise StoreFormatError(f"store dim must be >= 1, got {dim}")
        self.dim = dim
        self.vectors: dict[bytes, np.ndarray] = {}
        for key, vec in (vectors or {}).items():
            self.put(key, vec)

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, key: bytes) -> bool:
        return key in self.vectors

    def get(self, key: bytes) -> np.ndarray | None:
        return self.vectors.get(key)

    def put(self, key: bytes, vec: np.ndarray) -> None:
        if len(key) != 32:
            raise StoreFormatError("store keys must be 32-byte SHA-256 digests")
        arr = np.asarray(vec, dtype=np.float32)
        if arr.shape != (self.dim,):
            raise StoreFormatError(
                f"vector shape {arr.shape} does not match store dim {self.dim}"
            )
        if not np.all(np.isfinite(arr)):
            raise StoreFormatError("store vectors must be finite")
        self.vectors[key] = arr

    @classmethod
    def load(cls, path: str) -> "EmbeddingStore":
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[: len(STORE_MAGIC)] != STORE_MAGIC:
            raise StoreFormatError(f"{path}: bad magic, not an embedding store")
        header_end = len(STORE_MAGIC) + 4
        if len(blob) < header_end:
            raise StoreFormatError(f"{path}: truncated header")
        (dim,) = struct.unpack_from("<I", blob, len(STORE_MAGIC))
        if dim < 1:
            raise StoreFormatError(f"{path}: dim must be >= 1, got {dim}")
        record = 32 + 4 * dim
        body = len(blob) - header_end
        if body % record != 0:
            raise StoreFormatError(f"{path}: truncated record at end of file")
        store = cls(dim)
        for off in range(header_end, len(blob), record):
            key = blob[off : off + 32]
            if key in store.vectors:
                raise StoreFormatError(f"{path}: duplicate key {key.hex()}")
            vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=off + 32)
            store.put(key, vec)
        return store

    def save(self, path: str) -> None:
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "wb") as fh:
            fh.write(STORE_MAGIC)
            fh.write(struct.pack("<I", self.dim))
            for key in self.vectors:
                fh.write(key)
                fh.write(self.vectors[key].astype("<f4").tobytes())
        os.replace(tmp, path)


class HashEncoder:
    """Feature-hashing bag-of-words encoder.

    Lowercase the text, split on maximal non-alphanumeric runs, hash each
    token with FNV-1a 64 into ``dim`` buckets, then L2-normalize the count
    vector. Token-less text encodes to the zero vector.
    """

    def __init__(self, dim: int) -> None:
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def encode(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        counts = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            counts[fnv1a64(token.encode("utf-8")) % self.dim] += 1.0
        vec = normalize(counts)
        vec.setflags(write=False)
        self._cache[text] = vec
        return vec

    def encode_decorated(self, decorated) -> np.ndarray:
        return self.encode(decorated.decorated_text)


class StoreEncoder:
    """Encoder backed by an :class:`EmbeddingStore`; normalizes at the boundary."""

    def __init__(self, store: EmbeddingStore) -> None:
        self.store = store
        self.dim = store.dim
        self._cache: dict[str, np.ndarray] = {}

    def encode(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        key = text_key(text)
        raw = self.store.get(key)
        if raw is None:
            raise MissingEmbedding(key.hex(), text)
        vec = normalize(raw.astype(np.float64))
        vec.setflags(write=False)
        self._cache[text] = vec
        return vec

    def encode_decorated(self, decorated) -> np.ndarray:
        return self.encode(decorated.decorated_text)


class SyntheticStoreEncoder(StoreEncoder):
    """Store encoder whose decorated-text vectors are derived, not stored.

    A decorated text embeds as ``0.7 * v(original) + 0.3 * v(cited
    neighbor)``, renormalized, where the cited neighbor is the nearest hit
    the decoration actually used (ties by id). Decorations carry their hit
    metadata, so no string parsing is involved and every decorated string a
    run can produce is covered by construction.
    """

    def encode_decorated(self, decorated) -> np.ndarray:
        base = self.encode(decorated.original_text)
        if not decorated.hits:
            return base
        cited = min(decorated.hits, key=lambda hit: (hit.distance, hit.id))
        neighbor = self.encode(cited.text)
        return normalize(0.7 * base + 0.3 * neighbor)


class AdaptedEncoder:
    """Composes a base provider with a linear adapter: y = normalize(W x)."""

    def __init__(self, base, W: np.ndarray) -> None:
        W = np.asarray(W, dtype=np.float64)
        if W.shape != (base.dim, base.dim):
            raise ValueError(f"adapter shape {W.shape} does not match dim {base.dim}")
        self.base = base
        self.W = W
        self.dim = base.dim

    def _project(self, x: np.ndarray) -> np.ndarray:
        if not x.any():
            return x
        with np.errstate(invalid="ignore", over="ignore"):
            y = self.W @ x
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("adapter produced a non-finite embedding")
        return normalize(y)

    def encode(self, text: str) -> np.ndarray:
        return self._project(self.base.encode(text))

    def encode_decorated(self, decorated) -> np.ndarray:
        return self._project(self.base.encode_decorated(decorated))


def wrap_encoder(base, W: np.ndarray | None):
    """Apply an adapter when one exists; identity otherwise."""
    return base if W is None else AdaptedEncoder(base, W)


def parse_encoder_spec(spec: str):
    """Build a provider from a spec string.

    Accepted forms: ``hash:<dim>``, ``store:<path>``, ``synth:<path>``
    (a store whose decorated-text vectors are derived by the synthetic
    construction rule).
    """
    kind, _, arg = spec.partition(":")
    if not arg:
        raise ValueError(f"encoder spec {spec!r} must look like kind:argument")
    if kind == "hash":
        try:
            dim = int(arg)
        except ValueError:
            raise ValueError(f"hash encoder dim must be an integer, got {arg!r}") from None
        return HashEncoder(dim)
    if kind == "store":
        return StoreEncoder(EmbeddingStore.load(arg))
    if kind == "synth":
        return SyntheticStoreEncoder(EmbeddingStore.load(arg))
    raise ValueError(f"unknown encoder kind {kind!r} (expected hash, store, or synth)")


def hash_encode(text: str, dim: int) -> np.ndarray:
    """One-shot convenience wrapper around :class:`HashEncoder`."""
    return HashEncoder(dim).encode(text)
