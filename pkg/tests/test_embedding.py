import json
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lasseval.audio_io import AudioClip, write_wav
from lasseval.embedding import (
    BackendConfig,
    CacheBackend,
    Embedding,
    MockBackend,
    ServiceBackend,
    TextQuery,
    audio_payload,
    cache_get,
    cache_key,
    cache_put,
    cosine_similarity,
    make_backend,
    mock_embed,
    parse_backend_spec,
    text_payload,
)
from lasseval.errors import (
    BackendError,
    CacheCorruptError,
    CacheMissError,
    MetricInputError,
    ServiceError,
)
from lasseval.rng import FNV1A_OFFSET, FNV1A_PRIME

from conftest import make_clip
from lasseval.audio_io import read_wav


def _emb(vec, modality="audio", model="m"):
    vec = np.asarray(vec, dtype=np.float64)
    return Embedding(vec, vec.size, modality, model)


class TestCosineSimilarity:
    def test_self_similarity(self):
        e = _emb([0.3, -0.4, 0.5])
        assert cosine_similarity(e, e) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal(self):
        assert cosine_similarity(_emb([1, 0]), _emb([0, 1])) == 0.0

    def test_hand_evaluated(self):
        value = cosine_similarity(_emb([1, 0]), _emb([1, 1]))
        assert value == pytest.approx(1 / np.sqrt(2), abs=1e-12)

    def test_dim_mismatch(self):
        with pytest.raises(MetricInputError, match="dimension"):
            cosine_similarity(_emb([1, 0]), _emb([1, 0, 0]))

    def test_zero_vector_rejected(self):
        with pytest.raises(MetricInputError, match="zero-norm"):
            cosine_similarity(_emb([0, 0]), _emb([1, 0]))

    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=8),
           st.floats(min_value=1e-3, max_value=1e3))
    @settings(max_examples=50, deadline=None)
    def test_positive_scale_invariance_and_symmetry(self, values, scale):
        vec = np.asarray(values + [1.0])  # trailing 1 keeps the norm nonzero
        other = np.linspace(0.2, 1.0, vec.size)
        a, b = _emb(vec), _emb(other)
        scaled = _emb(vec * scale)
        assert cosine_similarity(scaled, b) == pytest.approx(
            cosine_similarity(a, b), abs=1e-9
        )
        assert cosine_similarity(a, b) == pytest.approx(
            cosine_similarity(b, a), abs=1e-12
        )


class TestMockEmbed:
    def test_deterministic(self):
        a = mock_embed(b"hello", "text", 64)
        b = mock_embed(b"hello", "text", 64)
        assert np.array_equal(a.vector, b.vector)

    def test_unit_norm(self):
        emb = mock_embed(b"anything at all", "audio", 512)
        assert np.linalg.norm(emb.vector) == pytest.approx(1.0, abs=1e-9)

    def test_modality_changes_vector(self):
        a = mock_embed(b"same bytes", "audio", 64)
        t = mock_embed(b"same bytes", "text", 64)
        assert not np.array_equal(a.vector, t.vector)

    def test_distinct_payloads_distinct_directions(self):
        a = mock_embed(b"a", "text", 64)
        b = mock_embed(b"b", "text", 64)
        assert cosine_similarity(_emb(a.vector, "text"), _emb(b.vector, "text")) < 1.0

    def test_empty_payload_rejected(self):
        with pytest.raises(BackendError):
            mock_embed(b"", "text", 8)

    def test_frozen_golden_vector(self):
        # computed once from the seeded pipeline and frozen; any change to
        # the hash, the stream, or the mapping breaks this
        emb = mock_embed(b"dog barking", "text", 8)
        expected = [
            0.18767111513076096,
            0.2437500905439222,
            -0.004602433166910944,
            -0.08836469521944568,
            0.45956447115888394,
            0.3507223674801249,
            0.37484317937495054,
            -0.6502483009026592,
        ]
        assert emb.vector.tolist() == expected

    def test_frozen_golden_cosine(self):
        ea = mock_embed(b"payload-alpha", "audio", 64)
        et = mock_embed(b"dog barking", "text", 64)
        assert cosine_similarity(ea, et) == pytest.approx(0.19021281279937927, abs=0)

    def test_matches_independent_scalar_reimplementation(self):
        def oracle(payload, modality, dim):
            prefix = b"A" if modality == "audio" else b"T"
            h = FNV1A_OFFSET
            for byte in prefix + payload:
                h = ((h ^ byte) * FNV1A_PRIME) % 2**64
            comps, state = [], h
            for _ in range(dim):
                state = (state + 0x9E3779B97F4A7C15) % 2**64
                z = state
                z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) % 2**64
                z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) % 2**64
                z ^= z >> 31
                comps.append((z >> 11) / 2**53 * 2 - 1)
            norm = sum(c * c for c in comps) ** 0.5
            return [c / norm for c in comps]

        for payload, modality in ((b"abc", "text"), (b"\x01\x02", "audio")):
            lib = mock_embed(payload, modality, 16).vector
            ref = np.asarray(oracle(payload, modality, 16))
            np.testing.assert_allclose(lib, ref, rtol=0, atol=1e-15)


class TestPayloads:
    def test_text_payload_normalizes(self):
        assert text_payload(TextQuery("  Dog Barking \n")) == b"dog barking"

    def test_text_query_rejects_blank(self):
        with pytest.raises(MetricInputError):
            TextQuery("   ")

    def test_audio_payload_is_int16_quantization(self):
        clip = AudioClip(np.array([0.0, 0.5, -1.0, 1.0]), 8000, 1)
        raw = np.frombuffer(audio_payload(clip), dtype="<i2")
        assert raw.tolist() == [0, 16384, -32768, 32767]

    def test_float_and_pcm16_masters_hash_identically(self, tmp_path):
        # a 16-bit master round-tripped through float WAV must produce the
        # same payload bytes, hence the same cache key
        master = make_clip(11, length=900)
        write_wav(master, tmp_path / "m16.wav", "pcm16")
        pcm = read_wav(tmp_path / "m16.wav")
        write_wav(pcm, tmp_path / "f32.wav", "float32")
        as_float = read_wav(tmp_path / "f32.wav")
        assert audio_payload(pcm) == audio_payload(as_float)
        assert cache_key("audio", audio_payload(pcm)) == cache_key(
            "audio", audio_payload(as_float)
        )


class TestCache:
    def test_put_get_round_trip_exact(self, tmp_path):
        emb = mock_embed(b"roundtrip", "audio", 32)
        cache_put(tmp_path, "k1", emb)
        back = cache_get(tmp_path, "k1")
        assert np.array_equal(back.vector, emb.vector)
        assert (back.dim, back.modality, back.model_id) == (32, "audio", emb.model_id)

    def test_missing_key_names_key(self, tmp_path):
        with pytest.raises(CacheMissError, match="absent-key"):
            cache_get(tmp_path, "absent-key")

    def test_truncated_file_is_corrupt(self, tmp_path):
        emb = mock_embed(b"x", "text", 8)
        cache_put(tmp_path, "k", emb)
        path = tmp_path / "k.emb.json"
        path.write_text(path.read_text()[:20])
        with pytest.raises(CacheCorruptError):
            cache_get(tmp_path, "k")

    def test_vector_length_disagreement_is_corrupt(self, tmp_path):
        doc = {"model_id": "m", "modality": "audio", "dim": 4, "vector": [0.1, 0.2]}
        (tmp_path / "bad.emb.json").write_text(json.dumps(doc))
        with pytest.raises(CacheCorruptError):
            cache_get(tmp_path, "bad")

    def test_dim_mismatch_put_rejected(self, tmp_path):
        cache_put(tmp_path, "a", mock_embed(b"x", "text", 8))
        with pytest.raises(BackendError, match="dim"):
            cache_put(tmp_path, "b", mock_embed(b"y", "text", 16))

    def test_concurrent_puts_never_tear(self, tmp_path):
        emb = mock_embed(b"contended", "audio", 64)
        errors = []

        def put():
            try:
                for _ in range(20):
                    cache_put(tmp_path, "same", emb)
            except Exception as exc:  # noqa: BLE001
                errors.append(exc)

        threads = [threading.Thread(target=put) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        back = cache_get(tmp_path, "same")
        assert np.array_equal(back.vector, emb.vector)

    def test_cache_backend_is_read_only(self, tmp_path):
        backend = CacheBackend(BackendConfig(kind="cache", cache_dir=tmp_path))
        with pytest.raises(CacheMissError):
            backend.embed_audio(make_clip(1))


class TestBackends:
    def test_mock_backend_bit_identical_calls(self):
        backend = make_backend(BackendConfig(kind="mock", mock_dim=64))
        clip = make_clip(2)
        a = backend.embed_audio(clip)
        b = backend.embed_audio(clip)
        assert np.array_equal(a.vector, b.vector)
        assert a.modality == "audio"

    def test_short_clip_rejected(self):
        backend = make_backend(BackendConfig(kind="mock"))
        clip = AudioClip(np.zeros(100), 8000, 1)  # 12.5 ms
        with pytest.raises(BackendError, match="short"):
            backend.embed_audio(clip)

    def test_stereo_clip_rejected(self):
        backend = make_backend(BackendConfig(kind="mock"))
        with pytest.raises(Exception, match="mono"):
            backend.embed_audio(AudioClip(np.zeros(16000), 8000, 2))

    def test_config_field_validation(self):
        with pytest.raises(BackendError):
            BackendConfig(kind="service")  # no endpoint
        with pytest.raises(BackendError):
            BackendConfig(kind="cache")  # no cache_dir
        with pytest.raises(BackendError):
            BackendConfig(kind="mock", mock_dim=0)
        with pytest.raises(BackendError):
            BackendConfig(kind="nonsense")

    def test_parse_backend_spec(self, tmp_path):
        assert parse_backend_spec("mock").kind == "mock"
        assert parse_backend_spec(f"cache:{tmp_path}").cache_dir == tmp_path
        assert parse_backend_spec("service:http://h:1").endpoint == "http://h:1"
        with pytest.raises(BackendError):
            parse_backend_spec("redis:whatever")


class TestServiceBackend:
    def test_round_trip_matches_mock(self, embedding_server):
        url, handler = embedding_server
        backend = ServiceBackend(BackendConfig(kind="service", endpoint=url))
        clip = make_clip(3)
        served = backend.embed_audio(clip)
        local = mock_embed(audio_payload(clip), "audio", handler.dim)
        assert served.dim == handler.dim
        np.testing.assert_allclose(served.vector, local.vector, rtol=0, atol=1e-15)

        query = TextQuery("Water Dripping")
        served_t = backend.embed_text(query)
        local_t = mock_embed(text_payload(query), "text", handler.dim)
        np.testing.assert_allclose(served_t.vector, local_t.vector, rtol=0, atol=1e-15)

    def test_non_2xx_carries_body(self, embedding_server):
        url, handler = embedding_server
        handler.fail_texts = {"boom"}
        backend = ServiceBackend(BackendConfig(kind="service", endpoint=url))
        with pytest.raises(ServiceError, match="induced failure"):
            backend.embed_text(TextQuery("boom"))

    def test_unreachable_service(self):
        backend = ServiceBackend(
            BackendConfig(kind="service", endpoint="http://127.0.0.1:9", timeout=0.5)
        )
        with pytest.raises(ServiceError, match="request failed"):
            backend.embed_text(TextQuery("hello"))

    def test_in_flight_requests_bounded(self, embedding_server):
        url, handler = embedding_server
        handler.delay_seconds = 0.05
        backend = ServiceBackend(
            BackendConfig(kind="service", endpoint=url, max_in_flight=3)
        )
        threads = [
            threading.Thread(target=backend.embed_text, args=(TextQuery(f"q{i}"),))
            for i in range(12)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert handler.peak <= 3

    def test_dim_pinned_across_calls(self, embedding_server):
        url, handler = embedding_server
        backend = ServiceBackend(BackendConfig(kind="service", endpoint=url))
        backend.embed_text(TextQuery("first"))
        handler.dim = handler.dim + 1  # simulate a misbehaving service
        with pytest.raises(BackendError, match="dim"):
            backend.embed_text(TextQuery("second"))
