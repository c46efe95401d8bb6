"""Command line entry points.

Subcommands cover ingestion and statistics, rater-consistency resolution and
splitting, the periodicity counter, synthetic sequence generation, metric
evaluation, the curation pipeline, and the annotation service.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import consistency, core, curation, density, metrics, synthgen
from .features_io import read_features, write_features
from .periodicity import count_and_localize

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_ERROR = 2


def _cmd_ingest(args) -> int:
    data = Path(args.file).read_bytes()
    source = core.Source(args.source) if args.source else None
    try:
        records = core.parse_release(data, source=source, strict=not args.lenient)
    except core.ReleaseFormatError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VIOLATIONS
    violations = [(core.clip_key(r), v) for r in records for v in core.validate(r)]
    n_annotations = sum(len(r.annotations) for r in records)
    print(f"parsed {len(records)} clips / {n_annotations} annotations")
    for key, violation in violations:
        print(f"  {key}: {violation.field}: {violation.message}")
    if args.out:
        Path(args.out).write_text(core.serialize_records(records))
        print(f"wrote internal records to {args.out}")
    return EXIT_VIOLATIONS if violations else EXIT_OK


def _split_arg(value: str) -> core.Split | None:
    return None if value == "all" else core.Split(value)


def _cmd_stats(args) -> int:
    records = _load_records(args.file)
    stats = core.compute_stats(records, _split_arg(args.split))
    if args.json:
        print(json.dumps(stats.__dict__, indent=2))
        return EXIT_OK
    print(f"videos       {stats.num_videos}")
    print(f"annotations  {stats.num_annotations}")
    print(f"duration s   avg {stats.duration_avg:.1f}  min {stats.duration_min:.2f}  max {stats.duration_max:.1f}")
    print(f"count        avg {stats.count_avg:.1f}  min {stats.count_min}  max {stats.count_max}")
    print(f"text words   avg {stats.text_avg:.1f}  min {stats.text_min}  max {stats.text_max}")
    print(f"vocab size   {stats.vocab_size}")
    return EXIT_OK


def _cmd_words(args) -> int:
    records = _load_records(args.file)
    for word, count in core.word_frequencies(records)[: args.top]:
        print(f"{count:>8}  {word}")
    return EXIT_OK


def _load_records(path: str) -> list[core.ClipRecord]:
    """Internal superset format if it parses, release format otherwise."""
    data = Path(path).read_bytes()
    try:
        return core.parse_records(data)
    except (KeyError, ValueError):
        return core.parse_release(data)


def _cmd_resolve(args) -> int:
    records = _load_records(args.file)
    policy = consistency.AgreementPolicy(iou_threshold=args.iou, max_count_delta=args.max_delta)
    rows = []
    for record in records:
        if len(record.annotations) < 2:
            continue
        outcome = consistency.resolve(record.annotations[:3], policy)
        record.consistent = outcome.verdict is consistency.Verdict.CONSISTENT
        record.state = core.ClipState.RESOLVED
        rows.append(
            {
                "video_id": record.video_id,
                "narration_timestamp_secs": record.narration_timestamp,
                "verdict": outcome.verdict.value,
                "agreeing_pair": outcome.agreeing_pair,
                # canonical pick is a toolkit convention, not part of the
                # release data; flag it so consumers know
                "canonical_rule": "count nearest pair mean, earlier wins ties",
                "canonical": None
                if outcome.canonical is None
                else {
                    "description": outcome.canonical.description,
                    "start_time": outcome.canonical.segment.start,
                    "end_time": outcome.canonical.segment.end,
                    "count": outcome.canonical.count,
                    "rater_id": outcome.canonical.rater_id,
                },
            }
        )
    print(json.dumps(rows, indent=2))
    if args.out:
        Path(args.out).write_text(core.serialize_records(records))
    return EXIT_OK


def _cmd_split(args) -> int:
    records = _load_records(args.file)
    kinetics_test_ids = None
    if args.kinetics_test_ids:
        kinetics_test_ids = set(json.loads(Path(args.kinetics_test_ids).read_text()))
    assigned = consistency.assign_splits(
        records,
        train_fraction=args.train_frac,
        seed=args.seed,
        kinetics_test_ids=kinetics_test_ids,
    )
    out = args.out or args.file
    Path(out).write_text(core.serialize_records(assigned))
    n_test = sum(1 for r in assigned if r.split is core.Split.TEST)
    print(f"{len(assigned) - n_test} train / {n_test} test -> {out}")
    return EXIT_OK


def _cmd_count(args) -> int:
    seq = read_features(args.features)
    result = count_and_localize(seq, score_threshold=args.threshold)
    out = {
        "count": result.count,
        "mean_score": round(result.mean_score, 4),
        "segment": None
        if result.segment is None
        else {"start_time": result.segment.start, "end_time": result.segment.end},
    }
    print(json.dumps(out, indent=2))
    if args.emit_density:
        values = np.zeros(seq.num_frames)
        if result.segment is not None:
            lo = int(round(result.segment.start * seq.fps))
            hi = int(round(result.segment.end * seq.fps))
            periods = result.per_frame_period[lo:hi]
            rates = np.where(periods > 0, 1.0 / np.maximum(periods, 1e-9), 0.0)
            values[lo:hi] = rates
        Path(args.emit_density).write_text(
            json.dumps({"fps": seq.fps, "values": values.tolist()})
        )
        print(f"per-frame density -> {args.emit_density}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = synthgen.SynthSpec(
        count=args.count,
        period=args.period,
        jitter=args.jitter,
        onset=args.onset,
        noise_snr_db=args.snr,
        dim=args.dim,
        total_frames=args.frames,
        fps=args.fps,
        seed=args.seed,
    )
    seq, truth = synthgen.generate(spec)
    write_features(args.out, seq, fmt=args.format)
    if args.truth:
        Path(args.truth).write_text(
            json.dumps(
                {
                    "count": truth.count,
                    "start_time": truth.segment.start,
                    "end_time": truth.segment.end,
                    "per_cycle_midpoints": list(truth.per_cycle_midpoints),
                },
                indent=2,
            )
        )
    print(f"wrote {seq.num_frames}x{seq.frames.shape[1]} features to {args.out}")
    return EXIT_OK


def _load_eval_entries(path: str) -> dict[tuple, dict]:
    raw = json.loads(Path(path).read_text())
    out: dict[tuple, dict] = {}
    for entry in raw:
        key = (entry["video_id"], entry.get("narration_timestamp_secs"))
        if key not in out:
            out[key] = entry
    return out


def _cmd_eval(args) -> int:
    truth = _load_eval_entries(args.truth)
    pred = _load_eval_entries(args.pred)
    pairs = []
    for key, t in truth.items():
        p = pred.get(key)
        if p is None:
            print(f"warning: no prediction for {key}, scoring count 0", file=sys.stderr)
            p = {"count": 0}
        true_segment = None
        if t.get("start_time") is not None and t.get("end_time") is not None:
            true_segment = core.TimeSegment(t["start_time"], t["end_time"])
        predicted_segment = None
        if p.get("start_time") is not None and p.get("end_time") is not None:
            predicted_segment = core.TimeSegment(p["start_time"], p["end_time"])
        pairs.append(
            metrics.EvalPair(
                predicted_count=int(p["count"]),
                true_count=int(t["count"]),
                true_segment=true_segment,
                predicted_segment=predicted_segment,
                mismatched=bool(t.get("mismatched", False)),
            )
        )
    report = metrics.evaluate(pairs, metrics.Normalization(args.norm))
    header = f"{'MAE':>8} {'OBOE':>8} {'OBZE':>8} {'RMSE':>8} {'IOU':>8} {'n':>6}"
    row = (
        f"{report.mae:8.3f} {report.oboe:8.3f} {report.obze:8.3f} "
        f"{report.rmse:8.3f} {report.iou:8.3f} {report.n:6d}"
    )
    print(header)
    print(row)
    if args.json:
        Path(args.json).write_text(
            json.dumps(
                {
                    "mae": report.mae,
                    "oboe": report.oboe,
                    "obze": report.obze,
                    "rmse": report.rmse,
                    "iou": report.iou,
                    "n": report.n,
                    "normalization": report.normalization.value,
                },
                indent=2,
            )
        )
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    in_dir = Path(args.in_dir)
    config = curation.PipelineConfig(
        llm_client=_llm_client_from_env() if args.llm == "http" else None,
        annotators=curation.ScriptedAnnotators.from_json(in_dir / "raters.json"),
        sample_size=args.sample_size,
        seed=args.seed,
        train_fraction=args.train_frac,
        checkpoint_dir=Path(args.checkpoints) if args.checkpoints else None,
    )
    if args.source == "ego":
        narrations = json.loads((in_dir / "narrations.json").read_text())
        inputs = [
            curation.NarrationCandidate(
                video_id=n["video_id"],
                narration_timestamp=float(n["narration_timestamp_secs"]),
                narration_text=n["narration_text"],
                video_duration=n.get("video_duration_secs"),
            )
            for n in narrations
        ]
    else:
        inputs = []
        for path in sorted((in_dir / "features").glob("*")):
            inputs.append((path.stem, read_features(path)))
    records, report = curation.run_pipeline(args.source, inputs, config)
    print(report.to_table())
    if args.out:
        Path(args.out).write_text(core.serialize_release(records))
        print(f"release document -> {args.out}")
    return EXIT_OK


def _llm_client_from_env() -> curation.HttpLlmClient:
    endpoint = os.environ.get("REPFORGE_LLM_ENDPOINT")
    if not endpoint:
        raise SystemExit("REPFORGE_LLM_ENDPOINT must be set for --llm http")
    return curation.HttpLlmClient(
        endpoint=endpoint,
        model=os.environ.get("REPFORGE_LLM_MODEL", ""),
        api_key=os.environ.get("REPFORGE_LLM_KEY", ""),
    )


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import AnnotationStore, ServiceConfig
    from .webapp import create_app

    config = ServiceConfig.from_file(args.config)
    store = AnnotationStore(args.store, config)
    if args.clips:
        _register_clips(store, Path(args.clips))
    uvicorn.run(create_app(store), host=args.host, port=args.port)
    return EXIT_OK


def _register_clips(store, path: Path) -> None:
    from .service import ServiceError

    for obj in json.loads(path.read_text()):
        try:
            store.add_clip(
                clip_id=obj["clip_id"],
                source=core.Source(obj["source"]),
                video_id=obj["video_id"],
                narration_timestamp=obj.get("narration_timestamp_secs"),
                media=obj.get("media"),
            )
        except ServiceError:
            pass  # already registered on a previous run


def _cmd_calibrate(args) -> int:
    """Pick a score threshold from synthetic ROC-style sweeps."""
    from .periodicity import periodicity_profile
    from .synthgen import SynthSpec, generate, generate_noise

    rng = np.random.default_rng(args.seed)
    positive, negative = [], []
    for i in range(args.seeds):
        count = int(rng.integers(2, 21))
        period = int(rng.integers(10, 31))
        if count * period * 1.05 > 300:
            period = max(10, int(300 * 0.95 / count))
        onset = int(rng.integers(0, max(1, 320 - int(count * period * 1.05) - 1)))
        spec = SynthSpec(count=count, period=period, jitter=0.03, onset=onset,
                         noise_snr_db=15.0, dim=8, total_frames=320, seed=int(rng.integers(1 << 30)))
        seq, truth = generate(spec)
        _, scores = periodicity_profile(seq)
        lo = int(truth.segment.start * spec.fps)
        hi = int(truth.segment.end * spec.fps)
        positive.extend(scores[lo:hi])
        noise_seq = generate_noise(seed=int(rng.integers(1 << 30)))
        _, noise_scores = periodicity_profile(noise_seq)
        negative.extend(noise_scores)
    negative_arr = np.asarray(negative)
    positive_arr = np.asarray(positive)
    threshold = float(np.quantile(negative_arr, 1.0 - args.noise_accept))
    recall = float((positive_arr >= threshold).mean())
    print(json.dumps({
        "threshold": round(threshold, 4),
        "noise_accept_rate": args.noise_accept,
        "frame_recall_at_threshold": round(recall, 4),
        "sequences": args.seeds,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and validate a release file")
    p.add_argument("file")
    p.add_argument("--source", choices=["ego4d", "kinetics"])
    p.add_argument("--lenient", action="store_true", help="skip bad entries instead of failing")
    p.add_argument("--out", help="write internal-format records here")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("stats", help="dataset statistics over a record file")
    p.add_argument("file")
    p.add_argument("--split", choices=["train", "test", "all"], default="all")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("words", help="ranked word frequencies of the descriptions")
    p.add_argument("file")
    p.add_argument("--top", type=int, default=50)
    p.set_defaults(func=_cmd_words)

    p = sub.add_parser("resolve", help="apply the two/three-rater agreement rules")
    p.add_argument("file")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--max-delta", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_resolve)

    p = sub.add_parser("split", help="assign train/test splits")
    p.add_argument("file")
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kinetics-test-ids", help="JSON array of upstream test video ids")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("count", help="count repetitions in a feature sequence")
    p.add_argument("features")
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--emit-density", metavar="FILE", help="write per-frame rates as JSON")
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("synth", help="generate a synthetic repetition sequence")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--period", type=int, required=True)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--onset", type=int, default=0)
    p.add_argument("--snr", type=float, default=float("inf"))
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--frames", type=int, default=320)
    p.add_argument("--fps", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    p.add_argument("--format", choices=["binary", "text"], default="binary")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="counting and segmentation metrics")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--norm", choices=["by-truth", "absolute"], default="by-truth")
    p.add_argument("--json", metavar="FILE", help="also write a flat JSON report")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pipeline", help="run the curation pipeline on an input directory")
    p.add_argument("--source", choices=["ego", "exo"], required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--llm", choices=["keyword", "http"], default="keyword")
    p.add_argument("--sample-size", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--checkpoints", help="stage checkpoint directory")
    p.add_argument("--out", help="write the final release document here")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--store", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--clips", help="JSON array of clips to register at startup")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("calibrate", help="recompute the counter's operating threshold")
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--noise-accept", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
