"""WAV decode/encode and the canonical in-memory audio representation.

The decoder is a small RIFF/WAVE parser accepting integer PCM (16/24/32
bit) and 32-bit IEEE float, little-endian throughout. Unknown chunks are
skipped; structural problems raise errors naming the offending chunk.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidAudioError, UnsupportedWavError, WavFormatError

_FORMAT_PCM = 1
_FORMAT_IEEE_FLOAT = 3


@dataclass(frozen=True)
class AudioClip:
    """Decoded audio: interleaved samples, sample rate, channel count.

    Samples are float64. Decoded files always land in [-1, 1] (integer
    full scale maps to +/-1); synthetic mixtures may exceed that range in
    memory and are only clamped when written back to disk.
    """

    samples: np.ndarray
    sample_rate: int
    channels: int = 1

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidAudioError("samples must be a 1-D interleaved array")
        object.__setattr__(self, "samples", samples)
        if self.sample_rate <= 0:
            raise InvalidAudioError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.channels < 1:
            raise InvalidAudioError(f"channels must be >= 1, got {self.channels}")
        if samples.size % self.channels != 0:
            raise InvalidAudioError(
                f"{samples.size} samples is not a multiple of {self.channels} channels"
            )
        if not np.all(np.isfinite(samples)):
            raise InvalidAudioError("NaN or Inf sample present")

    @property
    def frames(self) -> int:
        return self.samples.size // self.channels

    @property
    def duration_seconds(self) -> float:
        return self.frames / self.sample_rate


def read_wav(path: str | Path) -> AudioClip:
    """Decode a RIFF/WAVE file into an AudioClip.

    Integer PCM of bit depth B maps sample x to x / 2^(B-1), so negative
    full scale is exactly -1.0. Float data is clamped to [-1, 1].
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavFormatError(f"{path}: too short for a RIFF header")
    magic, _riff_size, form = struct.unpack_from("<4sI4s", data, 0)
    if magic != b"RIFF":
        raise WavFormatError(f"{path}: missing RIFF magic in header chunk")
    if form != b"WAVE":
        raise WavFormatError(f"{path}: RIFF form is {form!r}, not WAVE")

    fmt = None
    payload = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id, chunk_size = struct.unpack_from("<4sI", data, offset)
        offset += 8
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise WavFormatError(f"{path}: 'fmt ' chunk truncated ({chunk_size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", data, offset)
        elif chunk_id == b"data":
            available = len(data) - offset
            if chunk_size > available + 1:
                raise WavFormatError(
                    f"{path}: 'data' chunk declares {chunk_size} bytes "
                    f"but only {available} are present"
                )
            payload = data[offset : offset + min(chunk_size, available)]
        # unknown chunks are skipped; odd-sized chunks carry a pad byte
        offset += chunk_size + (chunk_size & 1)

    if fmt is None:
        raise WavFormatError(f"{path}: no 'fmt ' chunk found")
    if payload is None:
        raise WavFormatError(f"{path}: no 'data' chunk found")

    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if channels < 1:
        raise WavFormatError(f"{path}: 'fmt ' chunk declares {channels} channels")
    if audio_format not in (_FORMAT_PCM, _FORMAT_IEEE_FLOAT):
        raise UnsupportedWavError(
            f"{path}: 'fmt ' codec code {audio_format} unsupported "
            f"(PCM=1 and IEEE float=3 only)"
        )

    samples = _decode_payload(payload, audio_format, bits, channels, str(path))
    return AudioClip(samples=samples, sample_rate=sample_rate, channels=channels)


def _decode_payload(
    payload: bytes, audio_format: int, bits: int, channels: int, label: str
) -> np.ndarray:
    if bits % 8 != 0 or bits == 0:
        raise UnsupportedWavError(f"{label}: {bits}-bit samples unsupported")
    frame_size = (bits // 8) * channels
    leftover = len(payload) % frame_size
    if leftover > 1:
        raise WavFormatError(
            f"{label}: 'data' payload of {len(payload)} bytes is not a "
            f"whole number of {frame_size}-byte frames"
        )
    payload = payload[: len(payload) - leftover]

    if audio_format == _FORMAT_PCM:
        if bits == 16:
            ints = np.frombuffer(payload, dtype="<i2").astype(np.float64)
            return ints / 2.0**15
        if bits == 24:
            raw = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
            vals = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
            vals = (vals ^ 0x800000) - 0x800000  # sign-extend 24 bits
            return vals.astype(np.float64) / 2.0**23
        if bits == 32:
            ints = np.frombuffer(payload, dtype="<i4").astype(np.float64)
            return ints / 2.0**31
        raise UnsupportedWavError(f"{label}: {bits}-bit integer PCM unsupported (16/24/32 only)")

    if bits != 32:
        raise UnsupportedWavError(f"{label}: {bits}-bit IEEE float unsupported (32 only)")
    floats = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(floats)):
        raise InvalidAudioError(f"{label}: NaN or Inf sample in float data")
    return np.clip(floats, -1.0, 1.0)


def write_wav(clip: AudioClip, path: str | Path, encoding: str = "float32") -> None:
    """Encode a clip as WAV; `encoding` is "pcm16" or "float32".

    Samples are clamped to [-1, 1] before encoding. 16-bit output
    quantizes with round-to-nearest-even over a 2^15 full scale, so a
    read_wav round trip stays within 1/32768 per sample.
    """
    if encoding == "pcm16":
        clamped = np.clip(clip.samples, -1.0, 1.0)
        ints = np.rint(clamped * 32768.0)
        frames = np.clip(ints, -32768, 32767).astype("<i2").tobytes()
        audio_format, bits = _FORMAT_PCM, 16
    elif encoding == "float32":
        clamped = np.clip(clip.samples, -1.0, 1.0)
        frames = clamped.astype("<f4").tobytes()
        audio_format, bits = _FORMAT_IEEE_FLOAT, 32
    else:
        raise ValueError(f"encoding must be 'pcm16' or 'float32', got {encoding!r}")

    block_align = clip.channels * bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(frames),
        b"WAVE",
        b"fmt ",
        16,
        audio_format,
        clip.channels,
        clip.sample_rate,
        clip.sample_rate * block_align,
        block_align,
        bits,
        b"data",
        len(frames),
    )
    Path(path).write_bytes(header + frames)


def to_mono(clip: AudioClip) -> AudioClip:
    """Average channels into one; duration and rate are unchanged."""
    if clip.channels == 1:
        return AudioClip(clip.samples.copy(), clip.sample_rate, 1)
    mono = clip.samples.reshape(-1, clip.channels).mean(axis=1)
    return AudioClip(mono, clip.sample_rate, 1)


def resample_linear(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resample of a mono clip.

    Output sample i is taken at source position i * src_rate/target_rate;
    positions past the last source sample hold its value. Output length is
    floor(src_len * target_rate / src_rate).
    """
    if clip.channels != 1:
        raise InvalidAudioError("resample_linear requires a mono clip")
    if target_rate <= 0:
        raise InvalidAudioError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate, 1)
    src_len = clip.samples.size
    out_len = (src_len * target_rate) // clip.sample_rate
    positions = np.arange(out_len, dtype=np.float64) * (clip.sample_rate / target_rate)
    resampled = np.interp(positions, np.arange(src_len, dtype=np.float64), clip.samples)
    return AudioClip(resampled, target_rate, 1)
