"""Counting and repetition-segmentation evaluation metrics.

Count metrics follow the repetition-counting convention of normalizing the
error by the ground-truth count; the absolute variant is kept behind a flag
and recorded in the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .core import TimeSegment
from .consistency import segment_iou


class Normalization(Enum):
    BY_TRUTH = "by-truth"
    ABSOLUTE = "absolute"


@dataclass(frozen=True)
class EvalPair:
    """One clip's predicted vs. true count and repetition segment.

    ``true_count`` 0 is reserved for mismatched-conditioning rows, where the
    correct prediction is no repetitions at all.
    """

    predicted_count: int
    true_count: int
    true_segment: TimeSegment | None = None
    predicted_segment: TimeSegment | None = None
    mismatched: bool = False

    def __post_init__(self) -> None:
        if self.predicted_count < 0:
            raise ValueError(f"predicted_count must be >= 0, got {self.predicted_count}")
        if not self.mismatched and self.true_count < 2:
            raise ValueError(
                f"true_count must be >= 2 unless the row is mismatched, got {self.true_count}"
            )


@dataclass(frozen=True)
class MetricReport:
    mae: float
    oboe: float
    obze: float
    rmse: float
    iou: float
    n: int
    normalization: Normalization = Normalization.BY_TRUTH


def evaluate(
    pairs: Sequence[EvalPair],
    normalization: Normalization = Normalization.BY_TRUTH,
) -> MetricReport:
    """Aggregate MAE, OBOE, OBZE, RMSE, and segment IOU over ``pairs``.

    OBOE counts rows off by more than one, OBZE rows off at all.  IOU averages
    over rows that carry a true segment; a missing predicted segment scores 0.
    Sums use exact accumulation, so the result is order independent.
    """
    if not pairs:
        raise ValueError("evaluate requires at least one pair")
    if normalization is Normalization.BY_TRUTH:
        for i, pair in enumerate(pairs):
            if pair.true_count <= 0:
                raise ValueError(
                    f"by-truth normalization requires true_count > 0 (row {i} has "
                    f"{pair.true_count}); use absolute mode for mismatched rows"
                )

    n = len(pairs)
    abs_errors = []
    sq_errors = []
    off_by_more_than_one = 0
    off_at_all = 0
    for pair in pairs:
        delta = pair.predicted_count - pair.true_count
        if normalization is Normalization.BY_TRUTH:
            err = abs(delta) / pair.true_count
        else:
            err = abs(delta)
        abs_errors.append(err)
        sq_errors.append(err * err)
        if abs(delta) > 1:
            off_by_more_than_one += 1
        if delta != 0:
            off_at_all += 1

    iou_values = [
        segment_iou(pair.predicted_segment, pair.true_segment)
        if pair.predicted_segment is not None
        else 0.0
        for pair in pairs
        if pair.true_segment is not None
    ]

    return MetricReport(
        mae=math.fsum(abs_errors) / n,
        oboe=off_by_more_than_one / n,
        obze=off_at_all / n,
        rmse=math.sqrt(math.fsum(sq_errors) / n),
        iou=math.fsum(iou_values) / len(iou_values) if iou_values else 0.0,
        n=n,
        normalization=normalization,
    )


def earliest_segment_rule(segments: Sequence[TimeSegment]) -> TimeSegment:
    """The segment scored when a clip has several: minimal start, then end."""
    if not segments:
        raise ValueError("earliest_segment_rule requires at least one segment")
    return min(segments, key=lambda s: (s.start, s.end))
