"""Exception hierarchy. Every subsystem raises a subclass of RestorIQError."""


class RestorIQError(Exception):
    """Base class for all errors raised by this package."""


class ImagingError(RestorIQError):
    """Malformed image or latent grid."""


class DegradationError(RestorIQError):
    """Unknown degradation kind or parameter out of range."""


class CorpusError(RestorIQError):
    """Invalid training sample, partition, or mixing configuration."""


class StreamError(RestorIQError):
    """Token stream construction failure (e.g. over the sequence cap)."""


class ModelError(RestorIQError):
    """Invalid model configuration or forward-pass contract violation."""


class TrainingDiverged(RestorIQError):
    """Non-finite loss encountered; carries step/phase diagnostics."""


class CheckpointError(RestorIQError):
    """Unreadable, corrupt, or incompatible checkpoint archive."""


class SamplingError(RestorIQError):
    """Inference-time failure (non-finite latents, bad task arity, ...)."""


class ConfigError(RestorIQError):
    """Bad run configuration or override of a nonexistent key."""


class MetricError(RestorIQError):
    """Undefined metric value (shape mismatch, constant sequence, ...)."""
