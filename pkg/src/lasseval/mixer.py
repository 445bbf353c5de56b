"""Mixture simulation at exact target SDR levels.

The noise gain follows in closed form from the SDR definition: mixing
s + g*n puts exactly ||g*n||^2 of distortion power on top of s, so
g = (||s||/||n||) * 10^(-target/20) lands the measured SDR on the target
up to float rounding. Three strategies cover the clean source, seeded
white noise, and a different-content companion clip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .audio_io import AudioClip
from .errors import MetricInputError

STRATEGY_SOURCE_ONLY = "source_only"
STRATEGY_WHITE_NOISE = "white_noise"
STRATEGY_OTHER_CONTENT = "other_content"
STRATEGIES = (STRATEGY_SOURCE_ONLY, STRATEGY_WHITE_NOISE, STRATEGY_OTHER_CONTENT)

DEFAULT_SDR_LEVELS_DB = (-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)

# Pre-gain sigma for generated white noise; the mixing gain rescales to the
# target anyway, this only sets headroom before float rounding.
WHITE_NOISE_SIGMA = 0.1


@dataclass(frozen=True)
class MixPlan:
    strategy: str
    target_sdr_db: float
    gain: float
    seed: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "target_sdr_db": self.target_sdr_db,
            "gain": self.gain,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SdrLevelGrid:
    levels: tuple[float, ...] = DEFAULT_SDR_LEVELS_DB

    def __post_init__(self) -> None:
        if not self.levels:
            raise MetricInputError("level grid must be non-empty")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise MetricInputError(f"levels must be strictly increasing, got {self.levels}")


def gain_for_target_sdr(source, noise, target_sdr_db: float) -> float:
    """Noise gain g so that sdr(source, source + g*noise) == target."""
    source = np.asarray(source, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if source.shape != noise.shape or source.ndim != 1:
        raise MetricInputError(
            f"source and noise must be 1-D and equal length, got {source.shape} vs {noise.shape}"
        )
    source_norm = float(np.linalg.norm(source))
    noise_norm = float(np.linalg.norm(noise))
    if source_norm == 0.0:
        raise MetricInputError("zero-energy source")
    if noise_norm == 0.0:
        raise MetricInputError("zero-energy noise")
    return (source_norm / noise_norm) * 10.0 ** (-target_sdr_db / 20.0)


def mix_at_sdr(
    source: AudioClip,
    noise: AudioClip,
    target_sdr_db: float,
    strategy: str = STRATEGY_OTHER_CONTENT,
    seed: int | None = None,
) -> tuple[AudioClip, MixPlan]:
    """Additively mix noise into source at an exact SDR level.

    Noise longer than the source is truncated; shorter noise is an error
    (looping would stamp periodicity artifacts onto the mixture). The sum
    is not renormalized and may exceed [-1, 1] in memory; write_wav clamps
    at encode time.
    """
    if source.channels != 1 or noise.channels != 1:
        raise MetricInputError("mix_at_sdr requires mono clips")
    if source.sample_rate != noise.sample_rate:
        raise MetricInputError(
            f"sample-rate mismatch: {source.sample_rate} Hz vs {noise.sample_rate} Hz"
        )
    if noise.samples.size < source.samples.size:
        raise MetricInputError(
            f"noise ({noise.samples.size} samples) shorter than source "
            f"({source.samples.size}); refusing to loop"
        )
    noise_cut = noise.samples[: source.samples.size]
    gain = gain_for_target_sdr(source.samples, noise_cut, target_sdr_db)
    mixture = AudioClip(source.samples + gain * noise_cut, source.sample_rate, 1)
    plan = MixPlan(strategy=strategy, target_sdr_db=float(target_sdr_db), gain=gain, seed=seed)
    return mixture, plan


def white_noise(length: int, sample_rate: int, seed: int) -> AudioClip:
    """Seeded Gaussian noise clip (sigma 0.1, clamped to [-1, 1])."""
    if length <= 0:
        raise MetricInputError(f"length must be positive, got {length}")
    samples = rng.gaussian_stream(seed, length, WHITE_NOISE_SIGMA)
    return AudioClip(np.clip(samples, -1.0, 1.0), sample_rate, 1)


def build_strategy_mixture(
    source: AudioClip,
    strategy: str,
    companion: AudioClip | None,
    level_db: float,
    seed: int = 0,
) -> tuple[AudioClip, MixPlan]:
    """One mixture for one (strategy, level) cell of a sweep."""
    if strategy == STRATEGY_SOURCE_ONLY:
        plan = MixPlan(strategy=strategy, target_sdr_db=float(level_db), gain=1.0)
        return AudioClip(source.samples.copy(), source.sample_rate, 1), plan
    if strategy == STRATEGY_WHITE_NOISE:
        noise = white_noise(source.samples.size, source.sample_rate, seed)
        return mix_at_sdr(source, noise, level_db, strategy=strategy, seed=seed)
    if strategy == STRATEGY_OTHER_CONTENT:
        if companion is None:
            raise MetricInputError("other_content strategy requires a companion clip")
        return mix_at_sdr(source, companion, level_db, strategy=strategy)
    raise MetricInputError(f"unknown strategy {strategy!r} (expected one of {STRATEGIES})")
