"""Toolkit for building and evaluating temporal repetition counting datasets."""

from .consistency import AgreementPolicy, ResolutionOutcome, Verdict, agree, assign_splits, resolve, segment_iou
from .core import (
    Annotation,
    ClipRecord,
    ClipState,
    DatasetStats,
    Source,
    Split,
    TimeSegment,
    compute_stats,
    parse_release,
    serialize_release,
    validate,
    word_frequencies,
)
from .density import (
    DensityVector,
    LossWeights,
    build_density,
    build_zero_target,
    combined_loss,
    count_from_density,
    scaled_mse,
    segment_from_density,
)
from .metrics import EvalPair, MetricReport, Normalization, earliest_segment_rule, evaluate
from .periodicity import (
    FeatureSequence,
    PeriodicityResult,
    candidate_filter,
    count_and_localize,
    estimate_period,
    self_similarity,
)
from .synthgen import SynthSpec, SynthTruth, generate, generate_noise

__version__ = "0.1.0"

__all__ = [
    "AgreementPolicy", "Annotation", "ClipRecord", "ClipState", "DatasetStats",
    "DensityVector", "EvalPair", "FeatureSequence", "LossWeights", "MetricReport",
    "Normalization", "PeriodicityResult", "ResolutionOutcome", "Source", "Split",
    "SynthSpec", "SynthTruth", "TimeSegment", "Verdict", "agree", "assign_splits",
    "build_density", "build_zero_target", "candidate_filter", "combined_loss",
    "compute_stats", "count_and_localize", "count_from_density",
    "earliest_segment_rule", "estimate_period", "evaluate", "generate",
    "generate_noise", "parse_release", "resolve", "scaled_mse", "segment_from_density",
    "segment_iou", "self_similarity", "serialize_release", "validate",
    "word_frequencies",
]
