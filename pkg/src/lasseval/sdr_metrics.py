"""SDR-based separation metrics over aligned sample vectors.

All three metrics are log power ratios of a reference signal against the
estimation error, computed in double precision with a small epsilon guard
and a +/-120 dB clamp so perfect reconstruction stays finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .errors import MetricInputError

EPSILON = 1e-12
DB_CLAMP = 120.0

# Separated outputs commonly differ from references by filter padding;
# anything beyond this relative length mismatch signals user error.
MAX_RELATIVE_LENGTH_MISMATCH = 0.01


@dataclass(frozen=True)
class SiSdrBreakdown:
    """Scale-invariant SDR with the fitted scaling factor echoed back."""

    alpha: float
    value_db: float


@dataclass(frozen=True)
class AlignedPair:
    reference: np.ndarray
    estimate: np.ndarray
    truncated_samples: int


def align_lengths(a: AudioClip, b: AudioClip) -> AlignedPair:
    """Truncate two mono clips of equal rate to their common length.

    Rejects pairs whose lengths differ by more than 1% of the longer one.
    """
    if a.channels != 1 or b.channels != 1:
        raise MetricInputError("align_lengths requires mono clips")
    if a.sample_rate != b.sample_rate:
        raise MetricInputError(
            f"sample-rate mismatch: {a.sample_rate} Hz vs {b.sample_rate} Hz"
        )
    la, lb = a.samples.size, b.samples.size
    if min(la, lb) == 0:
        raise MetricInputError("zero-length overlap between clips")
    diff = abs(la - lb)
    if diff / max(la, lb) > MAX_RELATIVE_LENGTH_MISMATCH:
        raise MetricInputError(
            f"length mismatch {la} vs {lb} exceeds "
            f"{MAX_RELATIVE_LENGTH_MISMATCH:.0%} tolerance"
        )
    n = min(la, lb)
    return AlignedPair(
        reference=a.samples[:n].copy(),
        estimate=b.samples[:n].copy(),
        truncated_samples=diff,
    )


def _clamped_db(numerator: float, denominator: float) -> float:
    # Exactly-zero power on either side saturates the clamp; the epsilon
    # guard alone would leave small-norm signals short of +/-120 dB.
    if numerator == 0.0:
        return -DB_CLAMP
    if denominator == 0.0:
        return DB_CLAMP
    value = 10.0 * np.log10((numerator + EPSILON) / (denominator + EPSILON))
    return float(np.clip(value, -DB_CLAMP, DB_CLAMP))


def _check_pair(reference: np.ndarray, estimate: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape or reference.ndim != 1:
        raise MetricInputError(
            f"vectors must be 1-D and equal length, got {reference.shape} vs {estimate.shape}"
        )
    if reference.size == 0:
        raise MetricInputError("empty vectors")
    return reference, estimate


def sdr(reference, estimate) -> float:
    """Signal-to-distortion ratio in dB: power of s over power of s - s_hat."""
    reference, estimate = _check_pair(reference, estimate)
    if not np.any(reference):
        raise MetricInputError("all-zero reference makes SDR undefined")
    signal_power = float(np.dot(reference, reference))
    error = reference - estimate
    error_power = float(np.dot(error, error))
    return _clamped_db(signal_power, error_power)


def sdri(reference, estimate, mixture) -> float:
    """SDR improvement: SDR of the estimate minus SDR of the raw mixture."""
    return sdr(reference, estimate) - sdr(reference, mixture)


def si_sdr(reference, estimate) -> SiSdrBreakdown:
    """Scale-invariant SDR: SDR after optimally rescaling the reference.

    alpha = (s_hat . s) / (s . s). An estimate orthogonal to the reference
    gives alpha = 0 and clamps to -120 dB instead of raising.
    """
    reference, estimate = _check_pair(reference, estimate)
    if not np.any(reference):
        raise MetricInputError("all-zero reference makes SI-SDR undefined")
    if not np.any(estimate):
        raise MetricInputError("all-zero estimate makes SI-SDR undefined")
    alpha = float(np.dot(estimate, reference) / np.dot(reference, reference))
    target = alpha * reference
    target_power = float(np.dot(target, target))
    error = target - estimate
    error_power = float(np.dot(error, error))
    return SiSdrBreakdown(alpha=alpha, value_db=_clamped_db(target_power, error_power))
