"""Inter-rater agreement, disagreement resolution, and train/test splitting.

Two raters agree when their segments overlap by at least the IOU threshold
and their counts differ by at most the allowed delta.  Any two-rater
disagreement escalates to a third rater; with three raters the clip is kept
as soon as any pair agrees.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .core import (
    Annotation,
    ClipRecord,
    Source,
    Split,
    TimeSegment,
    clip_key,
    round_half_away,
    with_split,
)


@dataclass(frozen=True)
class AgreementPolicy:
    """Thresholds deciding when two annotations of one clip agree."""

    iou_threshold: float = 0.5
    max_count_delta: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.iou_threshold <= 1:
            raise ValueError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if self.max_count_delta < 0:
            raise ValueError(f"max_count_delta must be >= 0, got {self.max_count_delta}")


class Verdict(Enum):
    CONSISTENT = "consistent"
    NEEDS_THIRD_RATER = "needs_third_rater"
    INCONSISTENT = "inconsistent"


@dataclass(frozen=True)
class ResolutionOutcome:
    verdict: Verdict
    agreeing_pair: tuple[str, str] | None = None
    canonical: Annotation | None = None


def segment_iou(a: TimeSegment, b: TimeSegment) -> float:
    """Intersection over union of two time intervals; 0 when disjoint."""
    intersection = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    union = max(a.end, b.end) - min(a.start, b.start)
    if union <= 0:
        return 0.0
    return intersection / union


def agree(a: Annotation, b: Annotation, policy: AgreementPolicy | None = None) -> bool:
    """Whether two annotations of the same clip agree under ``policy``."""
    policy = policy or AgreementPolicy()
    return (
        segment_iou(a.segment, b.segment) >= policy.iou_threshold
        and abs(a.count - b.count) <= policy.max_count_delta
    )


def _canonical(a: Annotation, b: Annotation) -> Annotation:
    # Pick the annotation whose count matches the pair's rounded mean; the
    # earlier submission wins exact ties.
    target = round_half_away((a.count + b.count) / 2.0)
    if abs(b.count - target) < abs(a.count - target):
        return b
    return a


def resolve(
    annotations: Sequence[Annotation],
    policy: AgreementPolicy | None = None,
) -> ResolutionOutcome:
    """Resolve 2 or 3 annotations of one clip into a consistency verdict.

    With two raters any disagreement (segment or count) asks for a third
    rater.  With three, pairs are scanned in submission order and the first
    agreeing pair is accepted; no agreeing pair means the clip is kept but
    marked inconsistent.
    """
    policy = policy or AgreementPolicy()
    n = len(annotations)
    if n not in (2, 3):
        raise ValueError(f"resolve expects 2 or 3 annotations, got {n}")

    pairs = [(0, 1)] if n == 2 else [(0, 1), (0, 2), (1, 2)]
    for i, j in pairs:
        if agree(annotations[i], annotations[j], policy):
            return ResolutionOutcome(
                verdict=Verdict.CONSISTENT,
                agreeing_pair=(annotations[i].rater_id, annotations[j].rater_id),
                canonical=_canonical(annotations[i], annotations[j]),
            )
    if n == 2:
        return ResolutionOutcome(verdict=Verdict.NEEDS_THIRD_RATER)
    return ResolutionOutcome(verdict=Verdict.INCONSISTENT)


def assign_splits(
    records: Iterable[ClipRecord],
    train_fraction: float = 0.8,
    seed: int = 0,
    kinetics_test_ids: set[str] | None = None,
) -> list[ClipRecord]:
    """Assign train/test splits; deterministic for a given seed.

    Only consistent records are eligible for the test split; inconsistent
    records always land in train.  Third-person records whose source video
    belongs to the upstream test partition are forced into test when that
    partition is supplied, and count against the test quota.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")

    ordered = sorted(records, key=clip_key)
    consistent = [r for r in ordered if r.consistent]

    forced: set[tuple] = set()
    if kinetics_test_ids:
        forced = {
            clip_key(r)
            for r in consistent
            if r.source is Source.KINETICS and r.video_id in kinetics_test_ids
        }

    pool = [r for r in consistent if clip_key(r) not in forced]
    rng = random.Random(seed)
    rng.shuffle(pool)

    n_test = len(consistent) - round(train_fraction * len(consistent))
    extra = max(0, n_test - len(forced))
    test_keys = forced | {clip_key(r) for r in pool[:extra]}

    out = []
    for record in ordered:
        if record.consistent and clip_key(record) in test_keys:
            out.append(with_split(record, Split.TEST))
        else:
            out.append(with_split(record, Split.TRAIN))
    return out
