"""Domain types, release-file ingestion/serialization, validation, and dataset statistics.

The release format is a JSON array with one object per annotation.  Multiple
annotations of the same clip are grouped into a single :class:`ClipRecord`;
first-person clips are keyed on ``(video_id, narration_timestamp_secs)``,
third-person clips on ``video_id`` alone.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

CLIP_DURATION = 10.0

RELEASE_FIELDS = (
    "description",
    "start_time",
    "end_time",
    "count",
    "split",
    "inter_rater_agreement",
    "video_id",
    "narration_timestamp_secs",
)


class Source(Enum):
    EGO4D = "ego4d"
    KINETICS = "kinetics"


class Split(Enum):
    TRAIN = "train"
    TEST = "test"
    UNASSIGNED = "unassigned"


class ClipState(Enum):
    CANDIDATE = "candidate"
    VALIDITY_PENDING = "validity_pending"
    VALID = "valid"
    INVALID = "invalid"
    ANNOTATED = "annotated"
    RESOLVED = "resolved"
    REJECTED = "rejected"


FPS_BY_SOURCE = {Source.EGO4D: 30.0, Source.KINETICS: 25.0}


def round_half_away(x: float) -> int:
    """Round to the nearest integer, halves away from zero.

    Shared by count extraction and canonical-count selection; avoids the
    banker's-rounding surprises of the builtin at exact ``.5`` sums.
    """
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class TimeSegment:
    """Temporal extent of a repetition, in seconds from clip start."""

    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Annotation:
    """One rater's answer for one clip: what repeats, where, and how often."""

    description: str
    segment: TimeSegment
    count: int
    rater_id: str = ""


@dataclass
class ClipRecord:
    """Identity and lifecycle of a single 10 s candidate clip."""

    source: Source
    video_id: str
    narration_timestamp: float | None = None
    fps: float = 0.0
    split: Split = Split.UNASSIGNED
    consistent: bool = False
    annotations: list[Annotation] = field(default_factory=list)
    state: ClipState = ClipState.CANDIDATE

    def __post_init__(self) -> None:
        if self.fps == 0.0:
            self.fps = FPS_BY_SOURCE[self.source]


def clip_key(record: ClipRecord) -> tuple:
    """Stable identity used for grouping, sorting, and split assignment."""
    if record.source is Source.EGO4D:
        return (record.source.value, record.video_id, record.narration_timestamp)
    return (record.source.value, record.video_id)


@dataclass(frozen=True)
class DatasetStats:
    num_videos: int
    num_annotations: int
    duration_avg: float
    duration_min: float
    duration_max: float
    count_avg: float
    count_min: int
    count_max: int
    text_avg: float
    text_min: int
    text_max: int
    vocab_size: int


@dataclass(frozen=True)
class Violation:
    """One broken invariant on a record, named by field and rule."""

    field: str
    message: str


@dataclass(frozen=True)
class FieldError:
    """A release-file defect located by entry index and field name."""

    index: int
    field: str
    message: str


class ReleaseFormatError(ValueError):
    """Raised when a release document violates the schema or value ranges."""

    def __init__(self, errors: Sequence[FieldError]):
        self.errors = list(errors)
        lines = [f"entry {e.index}, field '{e.field}': {e.message}" for e in self.errors]
        super().__init__("invalid release document:\n" + "\n".join(lines))


class EmptySelectionError(ValueError):
    """Raised when statistics are requested over an empty selection."""


_TOKEN_RUN = re.compile(r"[^0-9a-z]+")

# Common-word exclusions applied in word-frequency reports; the first six are
# the fixed subject/motion words stripped from the released word clouds.
DEFAULT_STOP_WORDS = frozenset(
    {
        "person", "man", "woman", "boy", "girl", "moving",
        "a", "an", "the", "and", "or", "of", "in", "on", "with", "to",
        "from", "at", "by", "for", "is", "are", "was", "were", "be",
        "being", "been", "his", "her", "hers", "its", "their", "theirs",
        "he", "she", "it", "they", "them", "this", "that", "these",
        "those", "as", "into", "onto", "then", "than", "while", "using",
        "something", "someone", "there", "here", "not", "no", "yes",
    }
)


def tokenize(text: str) -> list[str]:
    """Case-fold and split on any non-alphanumeric run, dropping empties."""
    return [t for t in _TOKEN_RUN.split(text.casefold()) if t]


# ---------------------------------------------------------------------------
# Release-format parsing and serialization
# ---------------------------------------------------------------------------

def _check_entry(entry: dict, index: int, source: Source, errors: list[FieldError]) -> bool:
    """Validate one release entry; append errors and report acceptability."""
    ok = True

    def err(field_name: str, message: str) -> None:
        nonlocal ok
        ok = False
        errors.append(FieldError(index, field_name, message))

    if not isinstance(entry, dict):
        err("", "entry is not an object")
        return False

    for key in ("description", "start_time", "end_time", "count", "split",
                "inter_rater_agreement", "video_id"):
        if key not in entry:
            err(key, "missing required field")
    if not ok:
        return False

    if not isinstance(entry["description"], str) or not entry["description"].strip():
        err("description", "must be a non-empty string")
    for key in ("start_time", "end_time"):
        if not isinstance(entry[key], (int, float)) or isinstance(entry[key], bool):
            err(key, "must be a number")
    if ok:
        start, end = float(entry["start_time"]), float(entry["end_time"])
        if start >= end:
            err("start_time", f"start_time {start} must be < end_time {end}")
        if start < 0:
            err("start_time", "must be >= 0")
        if end > CLIP_DURATION:
            err("end_time", f"must be <= clip duration {CLIP_DURATION}")

    count = entry.get("count")
    if isinstance(count, bool) or not isinstance(count, (int, float)) or count != int(count):
        err("count", "must be an integer")
    elif count < 2:
        err("count", f"count {int(count)} violates count >= 2")

    split_raw = entry.get("split")
    split = None
    if not isinstance(split_raw, str) or split_raw.casefold() not in ("train", "test"):
        err("split", f"unknown split label {split_raw!r}")
    else:
        split = Split(split_raw.casefold())

    agreement = entry.get("inter_rater_agreement")
    if not isinstance(agreement, bool):
        err("inter_rater_agreement", "must be a boolean")
    elif split is Split.TEST and not agreement:
        err("inter_rater_agreement", "test-split entries must be consistent")

    if not isinstance(entry["video_id"], str) or not entry["video_id"]:
        err("video_id", "must be a non-empty string")

    if source is Source.EGO4D:
        ts = entry.get("narration_timestamp_secs")
        if ts is None or isinstance(ts, bool) or not isinstance(ts, (int, float)):
            err("narration_timestamp_secs", "required numeric field for first-person clips")
    elif "narration_timestamp_secs" in entry and entry["narration_timestamp_secs"] is not None:
        err("narration_timestamp_secs", "not allowed for third-person clips")

    return ok


def _infer_source(entries: list) -> Source:
    for entry in entries:
        if isinstance(entry, dict):
            has_ts = entry.get("narration_timestamp_secs") is not None
            return Source.EGO4D if has_ts else Source.KINETICS
    return Source.KINETICS


def parse_release(
    data: bytes | str,
    source: Source | None = None,
    strict: bool = True,
) -> list[ClipRecord]:
    """Parse a release document into one :class:`ClipRecord` per unique clip.

    ``inter_rater_agreement`` maps onto :attr:`ClipRecord.consistent`.  When
    ``strict`` every defective entry raises a :class:`ReleaseFormatError`
    carrying entry index and field name; otherwise defective entries are
    dropped and the remainder parsed.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        entries = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ReleaseFormatError([FieldError(-1, "", f"malformed JSON: {exc}")]) from exc
    if not isinstance(entries, list):
        raise ReleaseFormatError([FieldError(-1, "", "document root must be an array")])

    if source is None:
        source = _infer_source(entries)

    errors: list[FieldError] = []
    records: dict[tuple, ClipRecord] = {}
    for index, entry in enumerate(entries):
        if not _check_entry(entry, index, source, errors):
            continue
        narration_ts = None
        if source is Source.EGO4D:
            narration_ts = float(entry["narration_timestamp_secs"])
        key = (entry["video_id"], narration_ts) if source is Source.EGO4D else (entry["video_id"],)
        annotation = Annotation(
            description=entry["description"],
            segment=TimeSegment(float(entry["start_time"]), float(entry["end_time"])),
            count=int(entry["count"]),
            rater_id=str(entry.get("rater_id", "")),
        )
        split = Split(entry["split"].casefold())
        consistent = bool(entry["inter_rater_agreement"])

        record = records.get(key)
        if record is None:
            records[key] = ClipRecord(
                source=source,
                video_id=entry["video_id"],
                narration_timestamp=narration_ts,
                split=split,
                consistent=consistent,
                annotations=[annotation],
            )
            continue
        if record.split is not split:
            errors.append(FieldError(index, "split", "conflicting split for the same clip"))
            continue
        if record.consistent != consistent:
            errors.append(
                FieldError(index, "inter_rater_agreement", "conflicting agreement for the same clip")
            )
            continue
        record.annotations.append(annotation)

    if errors and strict:
        raise ReleaseFormatError(errors)

    result = list(records.values())
    for record in result:
        record.state = ClipState.RESOLVED if len(record.annotations) >= 2 else ClipState.ANNOTATED
    return result


def _release_entry(record: ClipRecord, annotation: Annotation) -> dict:
    entry = {
        "description": annotation.description,
        "start_time": annotation.segment.start,
        "end_time": annotation.segment.end,
        "count": annotation.count,
        "split": record.split.value,
        "inter_rater_agreement": record.consistent,
        "video_id": record.video_id,
    }
    if record.source is Source.EGO4D:
        entry["narration_timestamp_secs"] = record.narration_timestamp
    return entry


def serialize_release(records: Iterable[ClipRecord]) -> str:
    """Emit the release document: one entry per annotation, canonical keys."""
    entries = [_release_entry(r, a) for r in records for a in r.annotations]
    return json.dumps(entries, indent=2)


def serialize_records(records: Iterable[ClipRecord]) -> str:
    """Superset serialization that also keeps lifecycle state and rater ids."""
    out = []
    for record in records:
        obj = {
            "video_id": record.video_id,
            "narration_timestamp_secs": record.narration_timestamp,
            "source": record.source.value,
            "fps": record.fps,
            "split": record.split.value,
            "inter_rater_agreement": record.consistent,
            "state": record.state.value,
            "annotations": [
                {
                    "description": a.description,
                    "start_time": a.segment.start,
                    "end_time": a.segment.end,
                    "count": a.count,
                    "rater_id": a.rater_id,
                }
                for a in record.annotations
            ],
        }
        out.append(obj)
    return json.dumps(out, indent=2)


def parse_records(data: bytes | str) -> list[ClipRecord]:
    """Parse the superset format produced by :func:`serialize_records`."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    raw = json.loads(data)
    records = []
    for obj in raw:
        annotations = [
            Annotation(
                description=a["description"],
                segment=TimeSegment(float(a["start_time"]), float(a["end_time"])),
                count=int(a["count"]),
                rater_id=a.get("rater_id", ""),
            )
            for a in obj.get("annotations", [])
        ]
        records.append(
            ClipRecord(
                source=Source(obj["source"]),
                video_id=obj["video_id"],
                narration_timestamp=obj.get("narration_timestamp_secs"),
                fps=float(obj["fps"]),
                split=Split(obj["split"]),
                consistent=bool(obj["inter_rater_agreement"]),
                annotations=annotations,
                state=ClipState(obj["state"]),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Validation and statistics
# ---------------------------------------------------------------------------

def validate(record: ClipRecord) -> list[Violation]:
    """Check every type invariant; an empty list means the record is sound."""
    violations: list[Violation] = []

    for i, annotation in enumerate(record.annotations):
        seg = annotation.segment
        prefix = f"annotations[{i}]."
        if seg.start < 0:
            violations.append(Violation(prefix + "start_time", "start >= 0"))
        if seg.start >= seg.end:
            violations.append(Violation(prefix + "start_time", "start < end"))
        if seg.end > CLIP_DURATION:
            violations.append(Violation(prefix + "end_time", f"end <= {CLIP_DURATION}"))
        if annotation.count < 2:
            violations.append(Violation(prefix + "count", "count >= 2"))
        if not annotation.description.strip():
            violations.append(Violation(prefix + "description", "non-empty description"))

    expected_fps = FPS_BY_SOURCE[record.source]
    if record.fps != expected_fps:
        violations.append(
            Violation("fps", f"fps must be {expected_fps:g} for {record.source.value} clips")
        )
    if record.source is Source.EGO4D and record.narration_timestamp is None:
        violations.append(Violation("narration_timestamp", "required for first-person clips"))
    if record.source is Source.KINETICS and record.narration_timestamp is not None:
        violations.append(Violation("narration_timestamp", "not allowed for third-person clips"))
    if record.state is ClipState.RESOLVED and len(record.annotations) < 2:
        violations.append(Violation("state", "resolved records need >= 2 annotations"))
    if record.split is Split.TEST and not record.consistent:
        violations.append(Violation("split", "test-split records must be consistent"))
    return violations


def _triple(values: Sequence[float]) -> tuple[float, float, float]:
    return (sum(values) / len(values), min(values), max(values))


def compute_stats(records: Iterable[ClipRecord], split: Split | None = None) -> DatasetStats:
    """Aggregate per-annotation statistics over records matching ``split``.

    Text lengths are counted in words after tokenization; the vocabulary size
    counts distinct tokens with no stop-word removal.
    """
    selected = [r for r in records if split is None or r.split is split]
    annotations = [a for r in selected for a in r.annotations]
    if not annotations:
        raise EmptySelectionError(
            f"no annotations in selection (split={'all' if split is None else split.value})"
        )

    durations = [a.segment.duration for a in annotations]
    counts = [a.count for a in annotations]
    token_lists = [tokenize(a.description) for a in annotations]
    text_lengths = [len(tokens) for tokens in token_lists]
    vocab = set()
    for tokens in token_lists:
        vocab.update(tokens)

    d_avg, d_min, d_max = _triple(durations)
    c_avg, c_min, c_max = _triple(counts)
    t_avg, t_min, t_max = _triple(text_lengths)
    return DatasetStats(
        num_videos=len(selected),
        num_annotations=len(annotations),
        duration_avg=d_avg,
        duration_min=d_min,
        duration_max=d_max,
        count_avg=c_avg,
        count_min=int(c_min),
        count_max=int(c_max),
        text_avg=t_avg,
        text_min=int(t_min),
        text_max=int(t_max),
        vocab_size=len(vocab),
    )


def word_frequencies(
    records: Iterable[ClipRecord],
    stop_words: frozenset[str] | set[str] | None = None,
) -> list[tuple[str, int]]:
    """Ranked (word, count) list over all descriptions, stop words removed."""
    stops = DEFAULT_STOP_WORDS if stop_words is None else stop_words
    counter: Counter[str] = Counter()
    for record in records:
        for annotation in record.annotations:
            counter.update(t for t in tokenize(annotation.description) if t not in stops)
    return sorted(counter.items(), key=lambda item: (-item[1], item[0]))


def with_split(record: ClipRecord, split: Split) -> ClipRecord:
    """Copy of ``record`` with the split replaced (records treated immutably)."""
    return replace(record, annotations=list(record.annotations), split=split)
