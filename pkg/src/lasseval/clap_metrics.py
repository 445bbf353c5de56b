"""CLAPScore metric family computed from audio/text embeddings.

CLAPScore is the cosine similarity between a separated clip's audio
embedding and the text query's embedding; the improvement and
reference-augmented variants are simple compositions of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .embedding import MODALITY_AUDIO, MODALITY_TEXT, Embedding, cosine_similarity
from .errors import MetricInputError

FLAG_NONPOSITIVE_HARMONIC = "nonpositive_harmonic_input"


@dataclass(frozen=True)
class ClapScores:
    """Per-record score bundle; optional parts appear together or not at all."""

    clapscore: float
    clapscore_before: float | None = None
    clapscore_i: float | None = None
    clapscore_ref: float | None = None
    ref_clapscore: float | None = None
    flags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if (self.clapscore_before is None) != (self.clapscore_i is None):
            raise MetricInputError("clapscore_i requires clapscore_before and vice versa")
        if self.clapscore_i is not None:
            expected = self.clapscore - self.clapscore_before
            if self.clapscore_i != expected:
                raise MetricInputError(
                    f"clapscore_i {self.clapscore_i} is not clapscore - before = {expected}"
                )
        if (self.clapscore_ref is None) != (self.ref_clapscore is None):
            raise MetricInputError("ref_clapscore requires clapscore_ref and vice versa")


def _require_modality(emb: Embedding, modality: str, name: str) -> None:
    if emb.modality != modality:
        raise MetricInputError(f"{name} must have modality {modality!r}, got {emb.modality!r}")


def clapscore(audio_emb: Embedding, text_emb: Embedding) -> float:
    """Cosine similarity between an audio embedding and a text embedding."""
    _require_modality(audio_emb, MODALITY_AUDIO, "audio_emb")
    _require_modality(text_emb, MODALITY_TEXT, "text_emb")
    return cosine_similarity(audio_emb, text_emb)


def clapscore_i(
    separated_emb: Embedding, mixture_emb: Embedding, text_emb: Embedding
) -> float:
    """Improvement from the mixture to the separated audio: after - before."""
    return clapscore(separated_emb, text_emb) - clapscore(mixture_emb, text_emb)


def ref_clapscore(clapscore_after: float, clapscore_ref: float) -> tuple[float, frozenset[str]]:
    """Harmonic mean of the separated and reference CLAPScores.

    Cosines can be non-positive, where the harmonic mean is undefined or
    sign-misleading; those cases yield 0.0 plus a flag instead of raising,
    so one bad record never aborts a batch.
    """
    for name, value in (("clapscore_after", clapscore_after), ("clapscore_ref", clapscore_ref)):
        if not -1.0 <= value <= 1.0:
            raise MetricInputError(f"{name} must lie in [-1, 1], got {value}")
    if clapscore_after > 0.0 and clapscore_ref > 0.0:
        value = 2.0 * clapscore_after * clapscore_ref / (clapscore_after + clapscore_ref)
        return value, frozenset()
    return 0.0, frozenset({FLAG_NONPOSITIVE_HARMONIC})
