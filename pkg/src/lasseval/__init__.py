"""Evaluation toolkit for language-queried audio source separation.

Computes the CLAPScore metric family (reference-free, embedding-based)
alongside classical SDR-based metrics, simulates mixtures at exact SDR
levels, and correlates the two metric families over evaluation batches.
"""

__version__ = "0.1.0"

from .audio_io import AudioClip, read_wav, resample_linear, to_mono, write_wav
from .clap_metrics import ClapScores, clapscore, clapscore_i, ref_clapscore
from .embedding import (
    BackendConfig,
    Embedding,
    TextQuery,
    cosine_similarity,
    make_backend,
)
from .mixer import MixPlan, SdrLevelGrid, gain_for_target_sdr, mix_at_sdr, white_noise
from .sdr_metrics import AlignedPair, SiSdrBreakdown, align_lengths, sdr, sdri, si_sdr
from .stats import CorrelationResult, aggregate, pearson, pearson_p_value

__all__ = [
    "AudioClip",
    "AlignedPair",
    "BackendConfig",
    "ClapScores",
    "CorrelationResult",
    "Embedding",
    "MixPlan",
    "SdrLevelGrid",
    "SiSdrBreakdown",
    "TextQuery",
    "aggregate",
    "align_lengths",
    "clapscore",
    "clapscore_i",
    "cosine_similarity",
    "gain_for_target_sdr",
    "make_backend",
    "mix_at_sdr",
    "pearson",
    "pearson_p_value",
    "read_wav",
    "ref_clapscore",
    "resample_linear",
    "sdr",
    "sdri",
    "si_sdr",
    "to_mono",
    "white_noise",
    "write_wav",
]
