"""Unified image quality assessment, restoration, and assessment-guided restoration.

A single two-expert transformer handles three task flows over one interleaved
token stream: quality assessment (text out), instruction-guided restoration
(image out), and analyze-then-restore (text, then image). Training pairs a
next-token objective for text with a rectified-flow objective for image
latents, scheduled by an easy-to-hard curriculum over synthetic degradations.
"""

__version__ = "0.1.0"

from restoriq.errors import (
    CheckpointError,
    ConfigError,
    CorpusError,
    DegradationError,
    ImagingError,
    MetricError,
    ModelError,
    RestorIQError,
    SamplingError,
    StreamError,
    TrainingDiverged,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "CorpusError",
    "DegradationError",
    "ImagingError",
    "MetricError",
    "ModelError",
    "RestorIQError",
    "SamplingError",
    "StreamError",
    "TrainingDiverged",
    "__version__",
]
