"""Annotation service: task leasing, submissions, resolution, and export.

State lives in an append-only store (one line-delimited file per stage) and
is reconstructed by replaying it.  All mutations go through a single lock so
the task pool is linearizable; leases are transient and never persisted.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from .consistency import AgreementPolicy, Verdict, assign_splits, resolve
from .core import (
    CLIP_DURATION,
    Annotation,
    ClipRecord,
    ClipState,
    Source,
    TimeSegment,
    clip_key,
    serialize_release,
)

DEFAULT_LEASE_TTL = 30 * 60.0


class TaskKind(Enum):
    VALIDITY = "validity"
    FULL = "full"


class ServiceError(Exception):
    """Machine-readable service failure."""

    status = 400

    def __init__(self, code: str, message: str, field_name: str | None = None):
        self.code = code
        self.message = message
        self.field = field_name
        super().__init__(message)

    def payload(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.field:
            out["field"] = self.field
        return out


@dataclass
class Task:
    task_id: str
    clip_id: str
    kind: TaskKind
    created_seq: int
    lease: tuple[str, float] | None = None
    done: bool = False


@dataclass
class ClipEntry:
    clip_id: str
    record: ClipRecord
    media: str | None = None
    validity_votes: dict[str, bool] = field(default_factory=dict)


@dataclass(frozen=True)
class ServiceConfig:
    tokens: dict[str, str] = field(default_factory=dict)  # bearer token -> rater id
    lease_ttl: float = DEFAULT_LEASE_TTL
    policy: AgreementPolicy = field(default_factory=AgreementPolicy)
    train_fraction: float = 0.8
    split_seed: int = 0
    kinetics_test_ids: frozenset[str] = frozenset()

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text())
        policy = AgreementPolicy(
            iou_threshold=raw.get("iou_threshold", 0.5),
            max_count_delta=raw.get("max_count_delta", 1),
        )
        return cls(
            tokens=dict(raw.get("tokens", {})),
            lease_ttl=float(raw.get("lease_ttl_seconds", DEFAULT_LEASE_TTL)),
            policy=policy,
            train_fraction=float(raw.get("train_fraction", 0.8)),
            split_seed=int(raw.get("split_seed", 0)),
            kinetics_test_ids=frozenset(raw.get("kinetics_test_ids", [])),
        )


class AnnotationStore:
    """Clip registry, task pool, and append-only persistence.

    Files: ``clips.jsonl`` (registrations), ``validity.jsonl`` and
    ``annotations.jsonl`` (submissions per stage).  Replaying them in order
    rebuilds the exact same tasks and records.
    """

    def __init__(
        self,
        directory: str | Path,
        config: ServiceConfig | None = None,
        clock: Callable[[], float] = time.time,
    ):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.config = config or ServiceConfig()
        self.clock = clock
        self._lock = threading.Lock()
        self._clips: dict[str, ClipEntry] = {}
        self._tasks: dict[str, Task] = {}
        self._task_counter = 0
        self._replaying = False
        self._replay()

    # -- persistence ------------------------------------------------------

    def _append(self, stage: str, obj: dict) -> None:
        if self._replaying:
            return
        path = self.directory / f"{stage}.jsonl"
        with path.open("a") as fh:
            fh.write(json.dumps(obj) + "\n")

    def _replay(self) -> None:
        self._replaying = True
        try:
            for line in self._read_lines("clips"):
                self._register_clip(
                    clip_id=line["clip_id"],
                    source=Source(line["source"]),
                    video_id=line["video_id"],
                    narration_timestamp=line.get("narration_timestamp_secs"),
                    media=line.get("media"),
                )
            for line in self._read_lines("validity"):
                self._apply_validity(line["clip_id"], line["rater_id"], bool(line["valid"]))
            for line in self._read_lines("annotations"):
                self._apply_annotation(
                    line["clip_id"],
                    Annotation(
                        description=line["description"],
                        segment=TimeSegment(line["start_time"], line["end_time"]),
                        count=int(line["count"]),
                        rater_id=line["rater_id"],
                    ),
                )
        finally:
            self._replaying = False

    def _read_lines(self, stage: str):
        path = self.directory / f"{stage}.jsonl"
        if not path.exists():
            return
        with path.open() as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    # -- registration -----------------------------------------------------

    def add_clip(
        self,
        clip_id: str,
        source: Source,
        video_id: str,
        narration_timestamp: float | None = None,
        media: str | None = None,
    ) -> None:
        """Register a clip for validity checking; spawns two validity tasks."""
        with self._lock:
            if clip_id in self._clips:
                raise ServiceError("clip_exists", f"clip {clip_id!r} already registered")
            self._register_clip(clip_id, source, video_id, narration_timestamp, media)
            self._append(
                "clips",
                {
                    "clip_id": clip_id,
                    "source": source.value,
                    "video_id": video_id,
                    "narration_timestamp_secs": narration_timestamp,
                    "media": media,
                },
            )

    def _register_clip(self, clip_id, source, video_id, narration_timestamp, media) -> None:
        record = ClipRecord(
            source=source,
            video_id=video_id,
            narration_timestamp=narration_timestamp,
            state=ClipState.VALIDITY_PENDING,
        )
        self._clips[clip_id] = ClipEntry(clip_id=clip_id, record=record, media=media)
        for _ in range(2):
            self._spawn_task(clip_id, TaskKind.VALIDITY)

    def _spawn_task(self, clip_id: str, kind: TaskKind) -> Task:
        self._task_counter += 1
        task = Task(
            task_id=f"t-{self._task_counter:06d}",
            clip_id=clip_id,
            kind=kind,
            created_seq=self._task_counter,
        )
        self._tasks[task.task_id] = task
        return task

    # -- leasing ----------------------------------------------------------

    def next_task(self, rater_id: str, kind: TaskKind) -> Task | None:
        """Lease the oldest open task of ``kind`` this rater hasn't touched.

        Exclusion is per stage: a validity vote does not bar the same rater
        from later annotating the clip in full.
        """
        with self._lock:
            now = self.clock()
            busy_clips = self._clips_touched_by(rater_id, kind, now)
            candidates = sorted(
                (
                    t
                    for t in self._tasks.values()
                    if t.kind is kind
                    and not t.done
                    and not self._leased(t, now)
                    and t.clip_id not in busy_clips
                ),
                key=lambda t: t.created_seq,
            )
            if not candidates:
                return None
            task = candidates[0]
            task.lease = (rater_id, now + self.config.lease_ttl)
            return task

    def _leased(self, task: Task, now: float) -> bool:
        return task.lease is not None and task.lease[1] > now

    def _clips_touched_by(self, rater_id: str, kind: TaskKind, now: float) -> set[str]:
        touched = set()
        for entry in self._clips.values():
            if kind is TaskKind.VALIDITY and rater_id in entry.validity_votes:
                touched.add(entry.clip_id)
            if kind is TaskKind.FULL and any(
                a.rater_id == rater_id for a in entry.record.annotations
            ):
                touched.add(entry.clip_id)
        for task in self._tasks.values():
            if (
                task.kind is kind
                and task.lease
                and task.lease[0] == rater_id
                and task.lease[1] > now
            ):
                touched.add(task.clip_id)
        return touched

    # -- submissions ------------------------------------------------------

    def submit_validity(self, task_id: str, rater_id: str, valid: bool) -> dict:
        with self._lock:
            task = self._checked_task(task_id, rater_id, TaskKind.VALIDITY)
            task.done = True
            task.lease = None
            self._apply_validity(task.clip_id, rater_id, valid)
            self._append(
                "validity", {"clip_id": task.clip_id, "rater_id": rater_id, "valid": valid}
            )
            return self._ack(task)

    def submit_annotation(self, task_id: str, rater_id: str, annotation: Annotation) -> dict:
        self._validate_annotation(annotation)
        with self._lock:
            task = self._checked_task(task_id, rater_id, TaskKind.FULL)
            annotation = Annotation(
                description=annotation.description,
                segment=annotation.segment,
                count=annotation.count,
                rater_id=rater_id,
            )
            task.done = True
            task.lease = None
            self._apply_annotation(task.clip_id, annotation)
            self._append(
                "annotations",
                {
                    "clip_id": task.clip_id,
                    "rater_id": rater_id,
                    "description": annotation.description,
                    "start_time": annotation.segment.start,
                    "end_time": annotation.segment.end,
                    "count": annotation.count,
                },
            )
            return self._ack(task)

    @staticmethod
    def _validate_annotation(annotation: Annotation) -> None:
        seg = annotation.segment
        if not annotation.description.strip():
            raise ServiceError("validation", "description must be non-empty", "description")
        if annotation.count < 2:
            raise ServiceError("validation", "count >= 2 required", "count")
        if seg.start < 0:
            raise ServiceError("validation", "start_time must be >= 0", "start_time")
        if seg.start >= seg.end:
            raise ServiceError("validation", "start_time must be < end_time", "start_time")
        if seg.end > CLIP_DURATION:
            raise ServiceError(
                "validation", f"end_time must be <= {CLIP_DURATION}", "end_time"
            )

    def _checked_task(self, task_id: str, rater_id: str, kind: TaskKind) -> Task:
        task = self._tasks.get(task_id)
        if task is None:
            raise ServiceError("unknown_task", f"no task {task_id!r}")
        if task.kind is not kind:
            raise ServiceError("wrong_kind", f"task {task_id} expects {task.kind.value}")
        if task.done:
            raise ServiceError("duplicate_submission", f"task {task_id} already submitted")
        now = self.clock()
        if task.lease is None or task.lease[0] != rater_id or task.lease[1] <= now:
            raise ServiceError("stale_lease", f"no open lease on {task_id} for this rater")
        return task

    def _ack(self, task: Task) -> dict:
        entry = self._clips[task.clip_id]
        return {
            "task_id": task.task_id,
            "clip_id": task.clip_id,
            "clip_state": entry.record.state.value,
        }

    # -- state transitions --------------------------------------------------

    def _apply_validity(self, clip_id: str, rater_id: str, valid: bool) -> None:
        entry = self._clips[clip_id]
        if rater_id in entry.validity_votes:
            raise ServiceError("duplicate_submission", "rater already voted on this clip")
        entry.validity_votes[rater_id] = valid
        if self._replaying:
            self._ensure_validity_tasks(clip_id)
        if len(entry.validity_votes) < 2:
            return
        if all(entry.validity_votes.values()):
            entry.record.state = ClipState.VALID
            for _ in range(2):
                self._spawn_task(clip_id, TaskKind.FULL)
        else:
            entry.record.state = ClipState.INVALID

    def _ensure_validity_tasks(self, clip_id: str) -> None:
        # during replay, mark one open validity task done per recorded vote
        for task in sorted(self._tasks.values(), key=lambda t: t.created_seq):
            if task.clip_id == clip_id and task.kind is TaskKind.VALIDITY and not task.done:
                task.done = True
                return

    def _apply_annotation(self, clip_id: str, annotation: Annotation) -> None:
        entry = self._clips[clip_id]
        if any(a.rater_id == annotation.rater_id for a in entry.record.annotations):
            raise ServiceError("duplicate_submission", "rater already annotated this clip")
        entry.record.annotations.append(annotation)
        if self._replaying:
            self._ensure_full_task(clip_id)
        n = len(entry.record.annotations)
        if n < 2:
            return
        outcome = resolve(entry.record.annotations, self.config.policy)
        if outcome.verdict is Verdict.NEEDS_THIRD_RATER:
            self._spawn_task(clip_id, TaskKind.FULL)
            entry.record.state = ClipState.ANNOTATED
        else:
            entry.record.consistent = outcome.verdict is Verdict.CONSISTENT
            entry.record.state = ClipState.RESOLVED

    def _ensure_full_task(self, clip_id: str) -> None:
        for task in sorted(self._tasks.values(), key=lambda t: t.created_seq):
            if task.clip_id == clip_id and task.kind is TaskKind.FULL and not task.done:
                task.done = True
                return

    # -- export -------------------------------------------------------------

    def export_release(self) -> str:
        """Appendix-style release document over all finalized clips."""
        with self._lock:
            if not self._clips:
                raise ServiceError("empty_store", "no clips registered")
            pending = [
                e.clip_id
                for e in self._clips.values()
                if e.record.state not in (ClipState.RESOLVED, ClipState.INVALID)
            ]
            if pending:
                raise ServiceError(
                    "not_finalized",
                    f"{len(pending)} clips still in progress (e.g. {pending[:3]})",
                )
            resolved = [
                e.record for e in self._clips.values() if e.record.state is ClipState.RESOLVED
            ]
            if not resolved:
                raise ServiceError("empty_store", "no resolved clips to export")
            with_splits = assign_splits(
                resolved,
                train_fraction=self.config.train_fraction,
                seed=self.config.split_seed,
                kinetics_test_ids=set(self.config.kinetics_test_ids) or None,
            )
            with_splits.sort(key=clip_key)
            return serialize_release(with_splits)

    def media_for(self, clip_id: str) -> str:
        with self._lock:
            entry = self._clips.get(clip_id)
            if entry is None:
                raise ServiceError("unknown_clip", f"no clip {clip_id!r}")
            if entry.media is None:
                raise ServiceError("no_media", f"clip {clip_id!r} has no media attached")
            return entry.media

    def snapshot(self) -> dict:
        """Debugging/equality view of the full mutable state."""
        with self._lock:
            return {
                "clips": {
                    cid: {
                        "state": e.record.state.value,
                        "consistent": e.record.consistent,
                        "votes": dict(sorted(e.validity_votes.items())),
                        "annotations": [
                            (a.rater_id, a.description, a.segment.start, a.segment.end, a.count)
                            for a in e.record.annotations
                        ],
                    }
                    for cid, e in sorted(self._clips.items())
                },
                "tasks": [
                    (t.task_id, t.clip_id, t.kind.value, t.done)
                    for t in sorted(self._tasks.values(), key=lambda t: t.created_seq)
                ],
            }
