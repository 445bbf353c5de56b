"""Audio/text embedding backends and cosine similarity.

Three interchangeable providers sit behind one interface: a wire-protocol
client for a live embedding service, a read-only on-disk cache, and a
deterministic mock that needs no model or network. The mock doubles as the
reference definition of the content-addressed payload bytes used for cache
keys, so renamed files and lossless format round trips hash identically.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import tempfile
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from . import rng
from .audio_io import AudioClip
from .errors import (
    BackendError,
    CacheCorruptError,
    CacheMissError,
    InvalidAudioError,
    MetricInputError,
    ServiceError,
)

MODALITY_AUDIO = "audio"
MODALITY_TEXT = "text"

# Single byte prefixed to payloads before hashing so the same bytes embed
# differently per modality.
_MODALITY_BYTE = {MODALITY_AUDIO: b"A", MODALITY_TEXT: b"T"}

MIN_CLIP_SECONDS = 0.1
DEFAULT_MOCK_DIM = 512

AUDIO_ENDPOINT = "/v1/embeddings/audio"
TEXT_ENDPOINT = "/v1/embeddings/text"
HEALTH_ENDPOINT = "/v1/health"

_CACHE_META_NAME = "_cache_meta.json"


@dataclass(frozen=True)
class Embedding:
    """Fixed-dimension real vector with modality and model provenance."""

    vector: np.ndarray
    dim: int
    modality: str
    model_id: str

    def __post_init__(self) -> None:
        vector = np.asarray(self.vector, dtype=np.float64)
        object.__setattr__(self, "vector", vector)
        if vector.ndim != 1 or vector.size != self.dim:
            raise BackendError(
                f"embedding vector length {vector.size} disagrees with dim {self.dim}"
            )
        if not np.all(np.isfinite(vector)):
            raise BackendError("embedding contains NaN or Inf components")
        if self.modality not in _MODALITY_BYTE:
            raise BackendError(f"unknown modality {self.modality!r}")


@dataclass(frozen=True)
class TextQuery:
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise MetricInputError("text query is empty after trimming whitespace")


@dataclass(frozen=True)
class BackendConfig:
    """Which embedding provider to use and its knobs.

    kind is one of "service", "cache", "mock"; exactly the fields for that
    kind are required.
    """

    kind: str
    endpoint: str | None = None
    cache_dir: Path | None = None
    mock_dim: int = DEFAULT_MOCK_DIM
    timeout: float = 30.0
    max_in_flight: int = 8

    def __post_init__(self) -> None:
        if self.timeout <= 0 or self.max_in_flight < 1:
            raise BackendError("timeout must be positive and max_in_flight >= 1")
        if self.kind == "service":
            if not self.endpoint:
                raise BackendError("service backend requires an endpoint URL")
        elif self.kind == "cache":
            if self.cache_dir is None:
                raise BackendError("cache backend requires cache_dir")
        elif self.kind == "mock":
            if self.mock_dim < 1:
                raise BackendError("mock_dim must be a positive integer")
        else:
            raise BackendError(f"unknown backend kind {self.kind!r}")

    def describe(self) -> dict:
        """JSON-ready echo of the fields relevant to this kind."""
        out: dict = {"kind": self.kind}
        if self.kind == "service":
            out["endpoint"] = self.endpoint
            out["timeout"] = self.timeout
            out["max_in_flight"] = self.max_in_flight
        elif self.kind == "cache":
            out["cache_dir"] = str(self.cache_dir)
        else:
            out["mock_dim"] = self.mock_dim
        return out


def audio_payload(clip: AudioClip) -> bytes:
    """Canonical hashable bytes for a mono clip.

    Samples are quantized to little-endian 16-bit (round to nearest even,
    2^15 full scale) so a float WAV and the 16-bit WAV of the same master
    produce identical payloads.
    """
    if clip.channels != 1:
        raise InvalidAudioError("audio payload requires a mono clip")
    ints = np.rint(np.clip(clip.samples, -1.0, 1.0) * 32768.0)
    return np.clip(ints, -32768, 32767).astype("<i2").tobytes()


def text_payload(query: TextQuery) -> bytes:
    """Canonical hashable bytes for a query: trimmed, lowercased UTF-8."""
    return query.text.strip().lower().encode("utf-8")


def cache_key(modality: str, payload: bytes) -> str:
    """Content address: SHA-256 hex over (modality byte || payload)."""
    return hashlib.sha256(_MODALITY_BYTE[modality] + payload).hexdigest()


def mock_embed(payload: bytes, modality: str, dim: int) -> Embedding:
    """Deterministic stand-in for the model encoders.

    Seeds a splitmix64 stream with the FNV-1a hash of (modality byte ||
    payload), draws dim components in [-1, 1), and L2-normalizes. Pure
    function of its inputs on every platform.
    """
    if not payload:
        raise BackendError("mock_embed requires a non-empty payload")
    if dim < 1:
        raise BackendError("mock_embed dim must be >= 1")
    seed = rng.fnv1a_64(_MODALITY_BYTE[modality] + payload)
    components = rng.units_signed(rng.splitmix64_stream(seed, dim))
    norm = float(np.linalg.norm(components))
    if norm == 0.0:
        raise BackendError("degenerate zero-norm mock embedding")
    return Embedding(
        vector=components / norm,
        dim=dim,
        modality=modality,
        model_id=f"mock-{dim}",
    )


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """Cosine of the angle between two embeddings, clamped to [-1, 1]."""
    if a.dim != b.dim:
        raise MetricInputError(f"dimension mismatch: {a.dim} vs {b.dim}")
    norm_a = float(np.linalg.norm(a.vector))
    norm_b = float(np.linalg.norm(b.vector))
    if norm_a == 0.0 or norm_b == 0.0:
        raise MetricInputError("cosine similarity undefined for a zero-norm vector")
    value = float(np.dot(a.vector, b.vector) / (norm_a * norm_b))
    return float(np.clip(value, -1.0, 1.0))


def _entry_path(cache_dir: Path, key: str) -> Path:
    return Path(cache_dir) / f"{key}.emb.json"


def cache_put(cache_dir: str | Path, key: str, emb: Embedding) -> None:
    """Write an embedding sidecar atomically (temp file + rename).

    The first put pins the cache's dimension; later puts with a different
    dim are rejected so one directory never mixes embedding spaces.
    """
    cache_dir = Path(cache_dir)
    meta_path = cache_dir / _CACHE_META_NAME
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("dim") != emb.dim:
            raise BackendError(
                f"cache at {cache_dir} holds dim {meta.get('dim')} embeddings, "
                f"refusing to store dim {emb.dim}"
            )
    else:
        _atomic_write(meta_path, json.dumps({"dim": emb.dim, "model_id": emb.model_id}))

    doc = {
        "model_id": emb.model_id,
        "modality": emb.modality,
        "dim": emb.dim,
        "vector": [float(v) for v in emb.vector],
    }
    _atomic_write(_entry_path(cache_dir, key), json.dumps(doc))


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def cache_get(cache_dir: str | Path, key: str) -> Embedding:
    """Read an embedding sidecar, validating its invariants."""
    path = _entry_path(Path(cache_dir), key)
    if not path.exists():
        raise CacheMissError(f"no cached embedding for key {key}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        emb = Embedding(
            vector=np.asarray(doc["vector"], dtype=np.float64),
            dim=int(doc["dim"]),
            modality=doc["modality"],
            model_id=doc["model_id"],
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, BackendError) as exc:
        raise CacheCorruptError(f"corrupt cache entry {path.name}: {exc}") from exc
    return emb


class EmbeddingBackend(ABC):
    """Common surface for the three embedding providers.

    Implementations must be safe to share across threads and must produce
    a single constant dimension for the lifetime of the instance.
    """

    def __init__(self, config: BackendConfig) -> None:
        self.config = config
        self._dim_lock = threading.Lock()
        self._pinned_dim: int | None = None

    def describe(self) -> dict:
        return self.config.describe()

    def embed_audio(self, clip: AudioClip) -> Embedding:
        if clip.channels != 1:
            raise InvalidAudioError("embed_audio requires a mono clip")
        if clip.duration_seconds < MIN_CLIP_SECONDS:
            raise BackendError(
                f"clip of {clip.duration_seconds:.4f}s is shorter than the "
                f"{MIN_CLIP_SECONDS}s embedding minimum"
            )
        return self._pin(self._embed_audio(clip))

    def embed_text(self, query: TextQuery) -> Embedding:
        return self._pin(self._embed_text(query))

    def _pin(self, emb: Embedding) -> Embedding:
        with self._dim_lock:
            if self._pinned_dim is None:
                self._pinned_dim = emb.dim
            elif self._pinned_dim != emb.dim:
                raise BackendError(
                    f"backend produced dim {emb.dim} after previously "
                    f"producing dim {self._pinned_dim}"
                )
        return emb

    @abstractmethod
    def _embed_audio(self, clip: AudioClip) -> Embedding: ...

    @abstractmethod
    def _embed_text(self, query: TextQuery) -> Embedding: ...


class MockBackend(EmbeddingBackend):
    """Deterministic offline backend; see mock_embed."""

    def _embed_audio(self, clip: AudioClip) -> Embedding:
        return mock_embed(audio_payload(clip), MODALITY_AUDIO, self.config.mock_dim)

    def _embed_text(self, query: TextQuery) -> Embedding:
        return mock_embed(text_payload(query), MODALITY_TEXT, self.config.mock_dim)


class CacheBackend(EmbeddingBackend):
    """Read-only lookup of precomputed embeddings; a miss is an error,
    never a silent fallthrough to some other provider."""

    def _embed_audio(self, clip: AudioClip) -> Embedding:
        return cache_get(self.config.cache_dir, cache_key(MODALITY_AUDIO, audio_payload(clip)))

    def _embed_text(self, query: TextQuery) -> Embedding:
        return cache_get(self.config.cache_dir, cache_key(MODALITY_TEXT, text_payload(query)))


class ServiceBackend(EmbeddingBackend):
    """HTTP client for a live embedding service.

    Bounds concurrent requests at max_in_flight; callers beyond that queue
    on a semaphore. Any non-2xx response raises ServiceError carrying the
    response body.
    """

    def __init__(self, config: BackendConfig) -> None:
        super().__init__(config)
        self._client = httpx.Client(
            base_url=config.endpoint.rstrip("/"), timeout=config.timeout
        )
        self._slots = threading.Semaphore(config.max_in_flight)

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, body: dict) -> dict:
        with self._slots:
            try:
                response = self._client.post(path, json=body)
            except httpx.HTTPError as exc:
                raise ServiceError(f"embedding service request failed: {exc}") from exc
        if not 200 <= response.status_code < 300:
            raise ServiceError(
                f"embedding service returned {response.status_code}: {response.text}"
            )
        try:
            return response.json()
        except ValueError as exc:
            raise ServiceError(f"embedding service sent invalid JSON: {exc}") from exc

    def _parse_single(self, doc: dict, modality: str) -> Embedding:
        try:
            dim = int(doc["dim"])
            vectors = doc["embeddings"]
            model_id = str(doc["model_id"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ServiceError(f"malformed embedding response: {exc}") from exc
        if not isinstance(vectors, list) or len(vectors) != 1:
            raise ServiceError(
                f"expected exactly one embedding in response, got {len(vectors) if isinstance(vectors, list) else type(vectors).__name__}"
            )
        return Embedding(
            vector=np.asarray(vectors[0], dtype=np.float64),
            dim=dim,
            modality=modality,
            model_id=model_id,
        )

    def _embed_audio(self, clip: AudioClip) -> Embedding:
        raw = clip.samples.astype("<f4").tobytes()
        body = {
            "sample_rate": clip.sample_rate,
            "audios": [base64.b64encode(raw).decode("ascii")],
        }
        return self._parse_single(self._post(AUDIO_ENDPOINT, body), MODALITY_AUDIO)

    def _embed_text(self, query: TextQuery) -> Embedding:
        # The model sees the trimmed text as typed; only cache keys and the
        # mock normalize case.
        body = {"texts": [query.text.strip()]}
        return self._parse_single(self._post(TEXT_ENDPOINT, body), MODALITY_TEXT)


def make_backend(config: BackendConfig) -> EmbeddingBackend:
    if config.kind == "mock":
        return MockBackend(config)
    if config.kind == "cache":
        return CacheBackend(config)
    return ServiceBackend(config)


def parse_backend_spec(spec: str) -> BackendConfig:
    """Parse the CLI backend notation: mock | cache:<dir> | service:<url>."""
    if spec == "mock":
        return BackendConfig(kind="mock")
    if spec.startswith("cache:"):
        directory = spec[len("cache:") :]
        if not directory:
            raise BackendError("cache backend spec needs a directory: cache:<dir>")
        return BackendConfig(kind="cache", cache_dir=Path(directory))
    if spec.startswith("service:"):
        url = spec[len("service:") :]
        if not url:
            raise BackendError("service backend spec needs a URL: service:<url>")
        return BackendConfig(kind="service", endpoint=url)
    raise BackendError(
        f"unknown backend spec {spec!r} (expected mock, cache:<dir>, or service:<url>)"
    )
