"""Populates embedding-store files from a sentence encoder.

Serves the pending-texts protocol: run the consumer against a store, let
it write a manifest of missing texts, export that manifest, and repeat
until the store covers everything the runs need. Appends are dedup'd by
the SHA-256 key of each text, so cycles converge.
"""

from .cli import InputError, main, read_texts, run_export
from .models import (
    DummyModel,
    ModelLoadError,
    SentenceTransformerModel,
    load_model,
)
from .store import (
    STORE_MAGIC,
    StoreError,
    StoreWriter,
    read_store,
    text_key,
)

__version__ = "0.1.0"
