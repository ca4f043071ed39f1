"""Batch evaluation of gender bias in machine translation from Monte-Carlo samples."""

__version__ = "0.1.0"

from .types import (  # noqa: F401
    BinnedSummary,
    ClusterAssignment,
    ContrastGroup,
    CueAnnotations,
    EffectEstimate,
    EntailmentMatrix,
    Gender,
    Instance,
    MethodMetrics,
    MetricRecord,
    RoleCue,
    Sample,
    SampleSet,
    SamplingMeta,
    ScoreRecord,
    SimilarityConfig,
    ValidationError,
)
