"""Tests for encoders: hashing, store-backed, synthetic, adapted."""

import struct
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagonn.decoration import DecoratedExample
from lagonn.encoders import (
    AdaptedEncoder,
    EmbeddingStore,
    HashEncoder,
    MissingEmbedding,
    STORE_MAGIC,
    StoreEncoder,
    StoreFormatError,
    SyntheticStoreEncoder,
    hash_encode,
    normalize,
    parse_encoder_spec,
    text_key,
    wrap_encoder,
)
from lagonn.neighbors import NeighborHit


def reference_fnv1a64(data: bytes) -> int:
    return reduce(lambda h, b: ((h ^ b) * 0x100000001B3) % 2**64, data, 0xCBF29CE484222325)


class TestHashEncoder:
    def test_empty_text_zero_vector(self):
        vec = hash_encode("", 8)
        assert vec.shape == (8,)
        assert np.all(vec == 0.0)

    def test_single_bucket_normalization(self):
        vec = hash_encode("aa aa", 8)
        assert np.count_nonzero(vec) == 1
        np.testing.assert_allclose(np.linalg.norm(vec), 1.0, atol=1e-9)
        assert vec.max() == pytest.approx(1.0)

    def test_two_token_buckets_from_reference_hash(self):
        """Bucket indexes must equal the reference FNV-1a hash mod dim."""
        vec = hash_encode("good movie", 256)
        good = reference_fnv1a64(b"good") % 256
        movie = reference_fnv1a64(b"movie") % 256
        assert good == 24 and movie == 15  # frozen from the reference
        np.testing.assert_allclose(vec[good], 1.0 / np.sqrt(2.0), atol=1e-12)
        np.testing.assert_allclose(vec[movie], 1.0 / np.sqrt(2.0), atol=1e-12)
        assert np.count_nonzero(vec) == 2

    def test_case_and_punctuation_invariance(self):
        dim = 64
        base = hash_encode("good movie", dim)
        np.testing.assert_array_equal(hash_encode("Good, MOVIE!!", dim), base)
        np.testing.assert_array_equal(hash_encode("good... movie??", dim), base)

    def test_underscore_splits_tokens(self):
        # underscores are not alphanumeric, so they separate tokens
        np.testing.assert_array_equal(
            hash_encode("good_movie", 64), hash_encode("good movie", 64)
        )

    @given(st.text(max_size=40), st.integers(min_value=1, max_value=64))
    @settings(max_examples=150)
    def test_norm_is_zero_or_one(self, text, dim):
        norm = np.linalg.norm(hash_encode(text, dim))
        assert norm == 0.0 or abs(norm - 1.0) <= 1e-9

    def test_determinism_and_cache(self):
        enc = HashEncoder(32)
        a = enc.encode("repeatable text")
        b = enc.encode("repeatable text")
        assert a is b  # cached
        np.testing.assert_array_equal(a, HashEncoder(32).encode("repeatable text"))

    def test_bad_dim(self):
        with pytest.raises(ValueError):
            HashEncoder(0)


class TestEmbeddingStore:
    def test_save_load_round_trip(self, tmp_path):
        store = EmbeddingStore(4)
        vecs = {
            text_key("alpha"): np.array([1, 2, 3, 4], dtype=np.float32),
            text_key("beta"): np.array([-1, 0.5, 0, 2], dtype=np.float32),
        }
        for key, vec in vecs.items():
            store.put(key, vec)
        path = str(tmp_path / "store.bin")
        store.save(path)
        loaded = EmbeddingStore.load(path)
        assert loaded.dim == 4
        assert len(loaded) == 2
        for key, vec in vecs.items():
            np.testing.assert_array_equal(loaded.get(key), vec)

    def test_layout_bytes(self, tmp_path):
        """Header is magic + little-endian uint32 dim; records follow."""
        store = EmbeddingStore(2)
        store.put(text_key("t"), np.array([1.5, -2.0], dtype=np.float32))
        path = str(tmp_path / "store.bin")
        store.save(path)
        blob = open(path, "rb").read()
        assert blob[:7] == STORE_MAGIC == b"LGNEMB1"
        assert struct.unpack_from("<I", blob, 7)[0] == 2
        assert blob[11:43] == text_key("t")
        assert struct.unpack_from("<2f", blob, 43) == (1.5, -2.0)
        assert len(blob) == 11 + 32 + 8

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTASTORE")
        with pytest.raises(StoreFormatError, match="magic"):
            EmbeddingStore.load(str(path))

    def test_truncated_record(self, tmp_path):
        store = EmbeddingStore(2)
        store.put(text_key("t"), np.array([1.0, 2.0], dtype=np.float32))
        path = str(tmp_path / "store.bin")
        store.save(path)
        blob = open(path, "rb").read()
        (tmp_path / "trunc.bin").write_bytes(blob[:-3])
        with pytest.raises(StoreFormatError, match="truncated"):
            EmbeddingStore.load(str(tmp_path / "trunc.bin"))

    def test_duplicate_key_rejected_on_load(self, tmp_path):
        record = text_key("t") + struct.pack("<2f", 1.0, 2.0)
        blob = STORE_MAGIC + struct.pack("<I", 2) + record + record
        path = tmp_path / "dup.bin"
        path.write_bytes(blob)
        with pytest.raises(StoreFormatError, match="duplicate"):
            EmbeddingStore.load(str(path))

    def test_put_validation(self):
        store = EmbeddingStore(3)
        with pytest.raises(StoreFormatError):
            store.put(b"short", np.zeros(3, dtype=np.float32))
        with pytest.raises(StoreFormatError):
            store.put(text_key("x"), np.zeros(4, dtype=np.float32))
        with pytest.raises(StoreFormatError):
            store.put(text_key("x"), np.array([np.nan, 0, 0], dtype=np.float32))


class TestStoreEncoder:
    def make_encoder(self):
        store = EmbeddingStore(4)
        store.put(text_key("present"), np.array([3, 4, 0, 0], dtype=np.float32))
        store.put(text_key("also here"), np.array([3, 4, 0, 0], dtype=np.float32))
        return StoreEncoder(store)

    def test_normalized_at_boundary(self):
        enc = self.make_encoder()
        np.testing.assert_allclose(enc.encode("present"), [0.6, 0.8, 0.0, 0.0], atol=1e-7)

    def test_missing_raises_with_key_and_text(self):
        enc = self.make_encoder()
        with pytest.raises(MissingEmbedding) as exc_info:
            enc.encode("absent text")
        err = exc_info.value
        assert err.text == "absent text"
        assert err.key_hex == text_key("absent text").hex()

    def test_equal_vectors_give_equal_outputs(self):
        enc = self.make_encoder()
        np.testing.assert_array_equal(enc.encode("present"), enc.encode("also here"))


class TestAdaptedEncoder:
    def test_identity_is_noop(self):
        base = HashEncoder(16)
        adapted = AdaptedEncoder(base, np.eye(16))
        np.testing.assert_allclose(
            adapted.encode("hello there"), base.encode("hello there"), rtol=0, atol=1e-15
        )

    def test_scaling_cancels(self):
        base = HashEncoder(16)
        adapted = AdaptedEncoder(base, 2.0 * np.eye(16))
        np.testing.assert_allclose(
            adapted.encode("hello there"), base.encode("hello there"), atol=1e-12
        )

    def test_random_adapter_unit_norm(self):
        rng = np.random.default_rng(0)
        base = HashEncoder(8)
        adapted = AdaptedEncoder(base, rng.normal(size=(8, 8)))
        for text in ("one two", "three", "four five six"):
            norm = np.linalg.norm(adapted.encode(text))
            assert abs(norm - 1.0) <= 1e-9

    def test_zero_vector_passthrough(self):
        adapted = AdaptedEncoder(HashEncoder(8), np.eye(8) * 5)
        assert np.all(adapted.encode("") == 0.0)

    def test_nonfinite_result_raises(self):
        W = np.full((8, 8), np.inf)
        adapted = AdaptedEncoder(HashEncoder(8), W)
        with pytest.raises(FloatingPointError):
            adapted.encode("boom")

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            AdaptedEncoder(HashEncoder(8), np.eye(4))

    def test_wrap_encoder(self):
        base = HashEncoder(4)
        assert wrap_encoder(base, None) is base
        assert isinstance(wrap_encoder(base, np.eye(4)), AdaptedEncoder)


class TestSyntheticStoreEncoder:
    def make(self):
        store = EmbeddingStore(2)
        store.put(text_key("orig"), np.array([1, 0], dtype=np.float32))
        store.put(text_key("nbr"), np.array([0, 1], dtype=np.float32))
        store.put(text_key("far"), np.array([-1, 0], dtype=np.float32))
        return SyntheticStoreEncoder(store)

    def decorated(self, hits):
        return DecoratedExample(
            id=None, original_text="orig", decorated_text="orig [SEP] [x 0.1]",
            label=None, hits=tuple(hits),
        )

    def test_derivation_rule(self):
        enc = self.make()
        dec = self.decorated([NeighborHit(id=0, distance=0.5, label=0, text="nbr")])
        want = normalize(0.7 * np.array([1.0, 0.0]) + 0.3 * np.array([0.0, 1.0]))
        np.testing.assert_allclose(enc.encode_decorated(dec), want, atol=1e-12)

    def test_nearest_cited_hit_wins(self):
        enc = self.make()
        dec = self.decorated(
            [
                NeighborHit(id=3, distance=0.9, label=0, text="far"),
                NeighborHit(id=1, distance=0.2, label=1, text="nbr"),
            ]
        )
        want = normalize(0.7 * np.array([1.0, 0.0]) + 0.3 * np.array([0.0, 1.0]))
        np.testing.assert_allclose(enc.encode_decorated(dec), want, atol=1e-12)

    def test_no_hits_falls_back_to_original(self):
        enc = self.make()
        dec = self.decorated([])
        np.testing.assert_allclose(enc.encode_decorated(dec), [1.0, 0.0], atol=1e-12)


class TestParseEncoderSpec:
    def test_hash(self):
        enc = parse_encoder_spec("hash:32")
        assert isinstance(enc, HashEncoder) and enc.dim == 32

    def test_store_and_synth(self, tmp_path):
        store = EmbeddingStore(2)
        store.put(text_key("t"), np.array([1, 0], dtype=np.float32))
        path = str(tmp_path / "s.bin")
        store.save(path)
        assert isinstance(parse_encoder_spec(f"store:{path}"), StoreEncoder)
        assert isinstance(parse_encoder_spec(f"synth:{path}"), SyntheticStoreEncoder)

    @pytest.mark.parametrize("spec", ["hash", "hash:x", "magic:3", "store:", ""])
    def test_invalid(self, spec):
        with pytest.raises((ValueError, FileNotFoundError)):
            parse_encoder_spec(spec)
