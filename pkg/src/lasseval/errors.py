"""Exception hierarchy shared across the toolkit."""


class LassEvalError(Exception):
    """Base class for all toolkit errors."""


class WavFormatError(LassEvalError):
    """Malformed RIFF/WAVE structure; message names the offending chunk."""


class UnsupportedWavError(LassEvalError):
    """Structurally valid WAV using a codec or bit depth we do not decode."""


class InvalidAudioError(LassEvalError):
    """Audio data violating clip invariants (NaN/Inf samples, bad shape)."""


class MetricInputError(LassEvalError):
    """Metric preconditions violated (zero signals, length/rate mismatch)."""


class BackendError(LassEvalError):
    """Embedding backend failure (service, cache, or invariant breach)."""


class CacheMissError(BackendError):
    """Requested key not present in a read-only embedding cache."""


class CacheCorruptError(BackendError):
    """Cache entry exists but cannot be parsed or violates its invariants."""


class ServiceError(BackendError):
    """Embedding service unreachable or returned a non-2xx response."""


class ManifestError(LassEvalError):
    """Manifest file unusable; message carries the offending line number."""
