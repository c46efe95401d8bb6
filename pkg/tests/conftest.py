from __future__ import annotations

import json

import pytest

from repforge.core import Annotation, ClipRecord, ClipState, Source, Split, TimeSegment


def make_annotation(start=2.0, end=6.0, count=4, description="person cutting wood", rater="r0"):
    return Annotation(
        description=description,
        segment=TimeSegment(start, end),
        count=count,
        rater_id=rater,
    )


def make_record(
    source=Source.KINETICS,
    video_id="vid-1",
    narration_timestamp=None,
    split=Split.TRAIN,
    consistent=False,
    annotations=None,
    state=ClipState.ANNOTATED,
):
    if source is Source.EGO4D and narration_timestamp is None:
        narration_timestamp = 12.0
    return ClipRecord(
        source=source,
        video_id=video_id,
        narration_timestamp=narration_timestamp,
        split=split,
        consistent=consistent,
        annotations=annotations if annotations is not None else [make_annotation()],
        state=state,
    )


def release_entry(
    description="person cutting wood",
    start_time=2.0,
    end_time=6.0,
    count=4,
    split="train",
    agreement=False,
    video_id="vid-1",
    narration_timestamp=None,
):
    entry = {
        "description": description,
        "start_time": start_time,
        "end_time": end_time,
        "count": count,
        "split": split,
        "inter_rater_agreement": agreement,
        "video_id": video_id,
    }
    if narration_timestamp is not None:
        entry["narration_timestamp_secs"] = narration_timestamp
    return entry


@pytest.fixture
def release_json():
    def build(entries):
        return json.dumps(entries).encode()

    return build
