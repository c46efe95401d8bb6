"""Candidate curation pipeline: selection, validity checks, annotation, resolution.

First-person candidates come from narrations classified by a language-model
client; third-person candidates are filtered by the periodicity counter.
Both then flow through two-rater validity checks, two-rater annotation, and
disagreement resolution, ending in train/test splits and a per-stage report.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

from .consistency import AgreementPolicy, Verdict, assign_splits, resolve
from .core import (
    Annotation,
    ClipRecord,
    ClipState,
    Source,
    clip_key,
    parse_records,
    serialize_records,
    tokenize,
)
from .periodicity import FeatureSequence, candidate_filter

logger = logging.getLogger(__name__)

CLIP_HALF_WINDOW = 5.0

PROMPT_TEMPLATE = (
    "Narration: {narration}. Q: Does the action described in above narration "
    "require any repeating motion? If the action is walking say no. A:"
)


@dataclass(frozen=True)
class NarrationCandidate:
    """A narrated moment proposing a 10 s clip centered on its timestamp."""

    video_id: str
    narration_timestamp: float
    narration_text: str
    video_duration: float | None = None

    def window(self) -> tuple[float, float]:
        lo = max(0.0, self.narration_timestamp - CLIP_HALF_WINDOW)
        hi = self.narration_timestamp + CLIP_HALF_WINDOW
        if self.video_duration is not None:
            hi = min(hi, self.video_duration)
        return (lo, hi)


@dataclass(frozen=True)
class PipelineReport:
    """Clip counts after each curation stage, in stage order."""

    source: str
    stages: tuple[tuple[str, int], ...]

    def ratios(self) -> list[tuple[str, float]]:
        out = []
        for (_, prev), (name, count) in zip(self.stages, self.stages[1:]):
            out.append((name, count / prev if prev else 0.0))
        return out

    def to_table(self) -> str:
        width = max(len(name) for name, _ in self.stages)
        lines = [f"{'Processing Stage'.ljust(width)} | # of clips"]
        lines.append("-" * len(lines[0]))
        for name, count in self.stages:
            lines.append(f"{name.ljust(width)} | {count:>10,}")
        return "\n".join(lines)


class LlmUnavailableError(RuntimeError):
    """The narration-classification client cannot be reached."""


class UnparseableReplyError(ValueError):
    """The client replied with something that is neither yes nor no."""


class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


# Verb stems that imply a repeating hand/body motion, and ones that imply a
# one-shot action.  Tuned to reproduce the documented example narrations.
REPETITIVE_STEMS = frozenset(
    {
        "cut", "chop", "peel", "mix", "stir", "scrub", "brush", "hammer",
        "saw", "wash", "wipe", "paint", "knead", "shake", "climb", "stair",
        "type", "operate", "chew", "sweep", "whisk", "rub", "sand", "drill",
        "slice", "dig", "row", "pedal", "jump", "clap", "knock", "pump",
        "swing", "fold", "stitch", "sew", "comb", "grate", "grind", "iron",
        "juggle", "mop", "massage", "polish", "pound", "rake", "scoop",
        "scrape", "shovel", "skip", "squeeze", "swim", "tap", "twist",
        "whip", "wring", "exercise", "bounce", "dribble", "drum", "knit",
        "crochet", "carve", "trim", "pluck", "strum", "scratch", "sharpen",
        "sift", "screw", "stamp", "shave", "file",
    }
)

NONREPETITIVE_STEMS = frozenset(
    {
        "open", "close", "drop", "enter", "exit", "leave", "look", "pass",
        "put", "place", "pick", "grab", "take", "hold", "watch", "stand",
        "sit", "turn", "carry", "point", "stare", "glance", "set", "throw",
        "catch", "lay", "lean", "hang", "wear", "remove", "insert", "plug",
        "switch", "check", "talk", "speak", "pour", "lift", "push", "pull",
    }
)

_STAIR_STEMS = frozenset({"stair", "climb"})


def _stems(token: str) -> set[str]:
    out = {token}
    for suffix in ("ing", "ed", "es", "s"):
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            out.add(token[: -len(suffix)])
    return out


class KeywordNarrationClient:
    """Deterministic offline stand-in for the narration classifier.

    A keyword rule-set: walking is always a no; known repetitive verbs say
    yes; known one-shot verbs say no; anything else defaults to no.
    """

    def complete(self, prompt: str) -> str:
        narration = self._extract_narration(prompt)
        return "yes" if self.classify(narration) else "no"

    @staticmethod
    def _extract_narration(prompt: str) -> str:
        start = prompt.find("Narration:")
        end = prompt.find(". Q:")
        if start == -1 or end == -1:
            return prompt
        return prompt[start + len("Narration:") : end].strip()

    def classify(self, narration: str) -> bool:
        stems: set[str] = set()
        for token in tokenize(narration):
            stems |= _stems(token)
        if "walk" in stems:
            return False
        if stems & REPETITIVE_STEMS:
            if stems & _STAIR_STEMS:
                logger.info(
                    "stair/climb narration treated as repetitive despite the "
                    "walking exclusion: %r", narration
                )
            return True
        if stems & NONREPETITIVE_STEMS:
            return False
        return False


class HttpLlmClient:
    """Minimal JSON-over-HTTP completion client for a remote model."""

    def __init__(self, endpoint: str, model: str = "", api_key: str = "", timeout: float = 30.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = requests.post(
                self.endpoint,
                json={"model": self.model, "prompt": prompt},
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            return str(response.json()["text"])
        except Exception as exc:
            raise LlmUnavailableError(f"narration client failed: {exc}") from exc


def narration_filter(
    candidate: NarrationCandidate,
    client: LlmClient,
    retries: int = 3,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> bool:
    """Ask the client whether the narrated action involves repeating motion."""
    if not candidate.narration_text.strip():
        raise ValueError("narration_text must be non-empty")
    prompt = PROMPT_TEMPLATE.format(narration=candidate.narration_text)

    last_error: Exception | None = None
    for attempt in range(retries):
        try:
            reply = client.complete(prompt)
        except LlmUnavailableError as exc:
            last_error = exc
            if attempt + 1 < retries:
                sleep(backoff * 2**attempt)
            continue
        word = reply.strip().casefold()
        if word.startswith("yes"):
            return True
        if word.startswith("no"):
            return False
        raise UnparseableReplyError(f"cannot interpret reply {reply!r} as yes/no")
    raise LlmUnavailableError(
        f"client unavailable after {retries} attempts: {last_error}"
    )


def remove_overlaps(candidates: Sequence[NarrationCandidate]) -> list[NarrationCandidate]:
    """Greedy per-video sweep keeping the earliest non-overlapping windows."""
    kept: set[NarrationCandidate] = set()
    by_video: dict[str, list[NarrationCandidate]] = {}
    for candidate in candidates:
        by_video.setdefault(candidate.video_id, []).append(candidate)
    for group in by_video.values():
        last_end = None
        for candidate in sorted(group, key=lambda c: c.narration_timestamp):
            lo, hi = candidate.window()
            if last_end is None or lo >= last_end:
                kept.add(candidate)
                last_end = hi
    return [c for c in candidates if c in kept]


class Annotators(Protocol):
    """Supplies scripted or human answers for validity and annotation tasks."""

    def judge_validity(self, clip_id: str, slot: int) -> bool: ...

    def annotate(self, clip_id: str, slot: int) -> Annotation: ...


class ScriptedAnnotators:
    """Dict-backed answers, for offline pipelines and fixtures.

    The script maps clip id to ``{"validity": [bool, bool], "annotations":
    [...2 or 3 annotation objects...]}``.
    """

    def __init__(self, script: dict):
        self.script = script

    @classmethod
    def from_json(cls, path: str | Path) -> "ScriptedAnnotators":
        raw = json.loads(Path(path).read_text())
        return cls(raw)

    def judge_validity(self, clip_id: str, slot: int) -> bool:
        return bool(self.script[clip_id]["validity"][slot])

    def annotate(self, clip_id: str, slot: int) -> Annotation:
        from .core import TimeSegment

        obj = self.script[clip_id]["annotations"][slot]
        return Annotation(
            description=obj["description"],
            segment=TimeSegment(float(obj["start_time"]), float(obj["end_time"])),
            count=int(obj["count"]),
            rater_id=obj.get("rater_id", f"rater-{slot}"),
        )


@dataclass
class PipelineConfig:
    llm_client: LlmClient | None = None
    annotators: Annotators | None = None
    policy: AgreementPolicy = field(default_factory=AgreementPolicy)
    score_threshold: float = 0.25
    sample_size: int | None = None
    seed: int = 0
    train_fraction: float = 0.8
    kinetics_test_ids: set[str] | None = None
    checkpoint_dir: Path | None = None


class PipelineStageError(RuntimeError):
    """A stage failed; earlier stages are checkpointed and resumable."""

    def __init__(self, stage: str, checkpoint: Path | None, cause: Exception):
        self.stage = stage
        self.checkpoint = checkpoint
        where = f" (checkpoints in {checkpoint})" if checkpoint else ""
        super().__init__(f"pipeline stage {stage!r} failed{where}: {cause}")


def ego_clip_id(candidate: NarrationCandidate) -> str:
    return f"{candidate.video_id}@{candidate.narration_timestamp:g}"


def _subsample(items: list, sample_size: int | None, seed: int) -> list:
    if sample_size is None or len(items) <= sample_size:
        return list(items)
    import random

    rng = random.Random(seed)
    picked = set(rng.sample(range(len(items)), sample_size))
    return [item for i, item in enumerate(items) if i in picked]


class _Checkpoints:
    """JSON stage outputs keyed by stage name; loads instead of recomputing."""

    def __init__(self, directory: Path | None):
        self.directory = directory
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)

    def load_or_run(self, stage: str, run, encode, decode):
        if self.directory is not None:
            path = self.directory / f"{stage}.json"
            if path.exists():
                logger.info("stage %s loaded from checkpoint", stage)
                return decode(json.loads(path.read_text()))
        result = run()
        if self.directory is not None:
            path = self.directory / f"{stage}.json"
            tmp = path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(encode(result), indent=2))
            tmp.replace(path)
        return result


def run_pipeline(
    source: str,
    inputs,
    config: PipelineConfig,
) -> tuple[list[ClipRecord], PipelineReport]:
    """Run curation end to end for one source.

    ``source`` is ``"ego"`` (inputs: list of :class:`NarrationCandidate`) or
    ``"exo"`` (inputs: list of ``(clip_id, FeatureSequence)`` pairs).
    Returns the surviving records with splits assigned and the stage report.
    """
    if source not in ("ego", "exo"):
        raise ValueError(f"source must be 'ego' or 'exo', got {source!r}")
    checkpoints = _Checkpoints(config.checkpoint_dir)
    stages: list[tuple[str, int]] = []

    def guarded(stage_name: str, fn):
        try:
            return fn()
        except PipelineStageError:
            raise
        except Exception as exc:
            raise PipelineStageError(stage_name, config.checkpoint_dir, exc) from exc

    # Stage 1: candidate selection
    if source == "ego":
        candidates: list[NarrationCandidate] = list(inputs)
        stages.append(("all clips", len(candidates)))

        def stage1() -> dict:
            client = config.llm_client or KeywordNarrationClient()
            chosen = []
            for candidate in candidates:
                try:
                    keep = narration_filter(candidate, client)
                except (LlmUnavailableError, UnparseableReplyError) as exc:
                    logger.warning("candidate %s undecided, excluded: %s",
                                   ego_clip_id(candidate), exc)
                    continue
                if keep:
                    chosen.append(candidate)
            kept = remove_overlaps(chosen)
            sampled = _subsample(kept, config.sample_size, config.seed)
            return {
                "n_chosen": len(chosen),
                "n_kept": len(kept),
                "sampled": [
                    {
                        "video_id": c.video_id,
                        "narration_timestamp_secs": c.narration_timestamp,
                        "narration_text": c.narration_text,
                    }
                    for c in sampled
                ],
            }

        result = guarded(
            "stage1", lambda: checkpoints.load_or_run("stage1", stage1, lambda x: x, lambda x: x)
        )
        stages.append(("narration filter", result["n_chosen"]))
        stages.append(("overlap removal", result["n_kept"]))
        stages.append(("manual labeling sample", len(result["sampled"])))
        selected = [
            ClipRecord(
                source=Source.EGO4D,
                video_id=row["video_id"],
                narration_timestamp=row["narration_timestamp_secs"],
                state=ClipState.VALIDITY_PENDING,
            )
            for row in result["sampled"]
        ]
        clip_ids = [f"{r.video_id}@{r.narration_timestamp:g}" for r in selected]
    else:
        pairs = list(inputs)
        stages.append(("all clips", len(pairs)))

        def stage1_exo() -> list[str]:
            chosen_ids = []
            for clip_id, seq in pairs:
                if candidate_filter(seq, config.score_threshold):
                    chosen_ids.append(clip_id)
            return chosen_ids

        chosen_ids = guarded(
            "stage1",
            lambda: checkpoints.load_or_run("stage1", stage1_exo, lambda x: x, lambda x: x),
        )
        stages.append(("periodicity filter", len(chosen_ids)))
        sampled_ids = _subsample(chosen_ids, config.sample_size, config.seed)
        stages.append(("manual labeling sample", len(sampled_ids)))
        selected = [
            ClipRecord(source=Source.KINETICS, video_id=clip_id, state=ClipState.VALIDITY_PENDING)
            for clip_id in sampled_ids
        ]
        clip_ids = sampled_ids

    annotators = config.annotators
    if annotators is None:
        raise ValueError("pipeline stages 2-4 need annotators (scripted or live)")

    # Stage 2: validity double-check; both raters must see a repetition
    def stage2() -> list[bool]:
        verdicts = []
        for clip_id in clip_ids:
            verdicts.append(
                annotators.judge_validity(clip_id, 0) and annotators.judge_validity(clip_id, 1)
            )
        return verdicts

    valid_mask = guarded(
        "stage2", lambda: checkpoints.load_or_run("stage2", stage2, lambda x: x, lambda x: x)
    )
    for record, ok in zip(selected, valid_mask):
        record.state = ClipState.VALID if ok else ClipState.INVALID
    valid_records = [r for r, ok in zip(selected, valid_mask) if ok]
    valid_ids = [cid for cid, ok in zip(clip_ids, valid_mask) if ok]
    stages.append(("valid repetition present", len(valid_records)))

    # Stage 3: two independent annotations per valid clip
    def stage3() -> list[ClipRecord]:
        out = []
        for record, clip_id in zip(valid_records, valid_ids):
            record.annotations = [
                annotators.annotate(clip_id, 0),
                annotators.annotate(clip_id, 1),
            ]
            record.state = ClipState.ANNOTATED
            out.append(record)
        return out

    annotated = guarded(
        "stage3",
        lambda: checkpoints.load_or_run(
            "stage3",
            stage3,
            lambda records: json.loads(serialize_records(records)),
            lambda raw: parse_records(json.dumps(raw)),
        ),
    )
    annotated_ids = valid_ids

    # Stage 4: resolve disagreements (third rater) and assign splits
    def stage4() -> list[ClipRecord]:
        resolved = []
        for record, clip_id in zip(annotated, annotated_ids):
            outcome = resolve(record.annotations, config.policy)
            if outcome.verdict is Verdict.NEEDS_THIRD_RATER:
                record.annotations.append(annotators.annotate(clip_id, 2))
                outcome = resolve(record.annotations, config.policy)
            record.consistent = outcome.verdict is Verdict.CONSISTENT
            record.state = ClipState.RESOLVED
            resolved.append(record)
        return assign_splits(
            resolved,
            train_fraction=config.train_fraction,
            seed=config.seed,
            kinetics_test_ids=config.kinetics_test_ids,
        )

    final_records = guarded(
        "stage4",
        lambda: checkpoints.load_or_run(
            "stage4",
            stage4,
            lambda records: json.loads(serialize_records(records)),
            lambda raw: parse_records(json.dumps(raw)),
        ),
    )
    stages.append(
        ("consistent count and segment", sum(1 for r in final_records if r.consistent))
    )

    final_records = sorted(final_records, key=clip_key)
    return final_records, PipelineReport(source=source, stages=tuple(stages))
