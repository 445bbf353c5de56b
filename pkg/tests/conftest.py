"""Shared fixtures: synthetic clips, WAV builders, and a local embedding
service implementing the wire protocol over the deterministic mock."""

from __future__ import annotations

import base64
import json
import struct
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from lasseval.audio_io import AudioClip
from lasseval.embedding import mock_embed
from lasseval.mixer import white_noise


def make_clip(seed: int, length: int = 4000, rate: int = 8000) -> AudioClip:
    """Deterministic noise clip; float32-representable samples."""
    clip = white_noise(length, rate, seed)
    return AudioClip(clip.samples.astype(np.float32).astype(np.float64), rate, 1)


def wav_bytes(
    payload: bytes,
    audio_format: int = 1,
    channels: int = 1,
    rate: int = 8000,
    bits: int = 16,
    pre_chunks: bytes = b"",
    declared_data_size: int | None = None,
) -> bytes:
    """Hand-assembled RIFF/WAVE bytes for decoder tests."""
    fmt = struct.pack(
        "<4sIHHIIHH",
        b"fmt ",
        16,
        audio_format,
        channels,
        rate,
        rate * channels * bits // 8,
        channels * bits // 8,
        bits,
    )
    data_size = len(payload) if declared_data_size is None else declared_data_size
    data = struct.pack("<4sI", b"data", data_size) + payload
    body = fmt + pre_chunks + data
    return struct.pack("<4sI4s", b"RIFF", 4 + len(body), b"WAVE") + body


class _EmbeddingHandler(BaseHTTPRequestHandler):
    dim = 16
    model_id = "test-service-16"
    fail_texts: set = set()
    delay_seconds = 0.0
    active = 0
    peak = 0
    lock = threading.Lock()

    def log_message(self, *args):  # keep test output quiet
        pass

    def _send(self, status: int, doc: dict) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/v1/health":
            self._send(200, {"status": "ok", "model_id": self.model_id, "dim": self.dim})
        else:
            self._send(404, {"error": f"no route {self.path}"})

    def do_POST(self):
        cls = type(self)
        with cls.lock:
            cls.active += 1
            cls.peak = max(cls.peak, cls.active)
        try:
            if cls.delay_seconds:
                time.sleep(cls.delay_seconds)
            length = int(self.headers.get("Content-Length", 0))
            try:
                body = json.loads(self.rfile.read(length))
            except json.JSONDecodeError:
                return self._send(400, {"error": "malformed JSON body"})
            if self.path == "/v1/embeddings/text":
                texts = body.get("texts")
                if not isinstance(texts, list) or not texts:
                    return self._send(400, {"error": "texts must be a non-empty list"})
                if any(t in self.fail_texts for t in texts):
                    return self._send(500, {"error": "induced failure"})
                if any(not str(t).strip() for t in texts):
                    return self._send(422, {"error": "empty string"})
                embs = [
                    mock_embed(str(t).strip().lower().encode("utf-8"), "text", self.dim)
                    for t in texts
                ]
            elif self.path == "/v1/embeddings/audio":
                audios = body.get("audios")
                rate = body.get("sample_rate")
                if not isinstance(audios, list) or not audios or not rate:
                    return self._send(400, {"error": "audios must be a non-empty list"})
                embs = []
                for b64 in audios:
                    raw = base64.b64decode(b64)
                    if len(raw) % 4:
                        return self._send(400, {"error": "payload not float32-aligned"})
                    samples = np.frombuffer(raw, dtype="<f4").astype(np.float64)
                    if samples.size / rate < 0.1:
                        return self._send(422, {"error": "clip shorter than 0.1 s"})
                    ints = np.clip(np.rint(np.clip(samples, -1, 1) * 32768.0), -32768, 32767)
                    embs.append(mock_embed(ints.astype("<i2").tobytes(), "audio", self.dim))
            else:
                return self._send(404, {"error": f"no route {self.path}"})
            self._send(
                200,
                {
                    "model_id": self.model_id,
                    "dim": self.dim,
                    "embeddings": [[float(v) for v in e.vector] for e in embs],
                },
            )
        finally:
            with cls.lock:
                cls.active -= 1


def build_eval_dataset(
    root,
    count: int = 3,
    with_reference: bool = True,
    separated_sdr_db: float = 12.0,
    mixture_sdr_db: float = 3.0,
    name: str = "manifest.jsonl",
):
    """Synthesize a seeded dataset: per record a reference, a mixture at
    mixture_sdr_db, and a 'separated' clip at separated_sdr_db."""
    from lasseval.audio_io import write_wav
    from lasseval.mixer import mix_at_sdr

    lines = []
    for k in range(count):
        reference = make_clip(1000 + k)
        noise = make_clip(2000 + k)
        mixture, _ = mix_at_sdr(reference, noise, mixture_sdr_db)
        separated, _ = mix_at_sdr(reference, noise, separated_sdr_db)
        write_wav(reference, root / f"ref{k}.wav", "float32")
        write_wav(mixture, root / f"mix{k}.wav", "float32")
        write_wav(separated, root / f"sep{k}.wav", "float32")
        record = {
            "id": f"r{k:02d}",
            "mixture_path": f"mix{k}.wav",
            "separated_path": f"sep{k}.wav",
            "query": f"synthetic scene number {k}",
        }
        if with_reference:
            record["reference_path"] = f"ref{k}.wav"
        lines.append(json.dumps(record))
    manifest = root / name
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


@pytest.fixture
def embedding_server():
    """Start a protocol-faithful embedding service on an ephemeral port."""

    class Handler(_EmbeddingHandler):
        fail_texts = set()
        active = 0
        peak = 0
        lock = threading.Lock()
        delay_seconds = 0.0

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_port}", Handler
    finally:
        server.shutdown()
        thread.join(timeout=5)
