"""Command-line entry point: generate, sample-frames, evaluate, schedule.

Every command is reproducible from (argv, config file, seed); worker count
only affects wall time, never output bytes. Exit codes: 0 success, 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from groupmood import __version__
from groupmood.catalog import load_catalog
from groupmood.compose import DirectorySink, StreamSink, generate_dataset
from groupmood.config import load_config
from groupmood.core import GroupClass, GroupMoodError, Seed
from groupmood.metrics import AGGREGATORS, compute_report, format_report, load_predictions
from groupmood.sample import build_schedule, load_video_index, sample_frames, schedule_to_json, write_sampled_frames


def _seed_arg(value: str) -> Seed:
    return Seed(int(value))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupmood",
        description="Deterministic synthetic group-emotion dataset toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"groupmood {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="compose and write a labeled synthetic dataset")
    gen.add_argument("config", help="TOML config file")
    gen.add_argument("--catalog", required=True, help="asset catalog root directory")
    gen.add_argument("--out", help="output dataset directory")
    gen.add_argument("--stream", action="store_true", help="write framed records to stdout instead of --out")
    gen.add_argument("--count", type=int, required=True, help="number of scenes")
    gen.add_argument("--seed", type=_seed_arg, default=Seed(0), help="root seed (default 0)")
    gen.add_argument("--workers", type=int, default=1, help="parallel scene workers")

    sf = sub.add_parser("sample-frames", help="sample frames uniformly from indexed videos")
    sf.add_argument("index", help="video index CSV")
    sf.add_argument("--k", type=int, required=True, help="number of frames to draw")
    sf.add_argument("--seed", type=_seed_arg, default=Seed(0))
    sf.add_argument("--out", required=True, help="output directory")
    sf.add_argument("--split", choices=("train", "val", "test"), help="restrict to one split")

    ev = sub.add_parser("evaluate", help="aggregate frame scores and report metrics")
    ev.add_argument("predictions", help="frame predictions JSONL")
    ev.add_argument("index", help="video index CSV with ground-truth labels")
    ev.add_argument("--agg", choices=sorted(AGGREGATORS), default="average")
    ev.add_argument("--format", choices=("table", "json"), default="table")

    sch = sub.add_parser("schedule", help="emit the epoch mixture schedule as JSON")
    sch.add_argument("config", help="TOML config file")
    sch.add_argument("index", help="video index CSV")
    sch.add_argument("--seed", type=_seed_arg, default=Seed(0))
    sch.add_argument("--out", help="output JSON file (default stdout)")
    sch.add_argument("--split", choices=("train", "val", "test"), help="restrict to one split")
    return parser


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    catalog = load_catalog(
        args.catalog,
        cfg.layout,
        cfg.chroma,
        required_emotions=cfg.generation.enabled_emotions(),
        min_background_size=cfg.generation.render_size,
    )
    if args.stream:
        sink = StreamSink(sys.stdout.buffer)
    elif args.out:
        sink = DirectorySink(args.out)
    else:
        raise GroupMoodError("generate needs --out DIR or --stream")

    summary = generate_dataset(
        catalog, cfg.generation, args.seed, args.count, sink, workers=args.workers
    )
    out = sys.stderr if args.stream else sys.stdout
    dist = ", ".join(
        f"{c.label_name}: {summary.class_counts[c]}" for c in GroupClass
    )
    print(f"generated {summary.count} scenes ({dist})", file=out)
    print(
        f"scene retries: {summary.scene_retries}, placement attempts: {summary.placement_attempts}",
        file=out,
    )
    print(f"throughput: {summary.images_per_second:.1f} images/s", file=out)
    return 0


def _filtered_videos(index_path, split):
    videos = load_video_index(index_path)
    if split:
        videos = [v for v in videos if v.split == split]
        if not videos:
            raise GroupMoodError(f"no videos with split {split!r} in {index_path}")
    return videos


def cmd_sample_frames(args) -> int:
    videos = _filtered_videos(args.index, args.split)
    refs = sample_frames(videos, args.k, args.seed)
    records = write_sampled_frames(videos, refs, args.out)
    print(f"wrote {len(records)} frames to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    series = load_predictions(args.predictions)
    videos = {v.video_id: v for v in load_video_index(args.index)}
    missing = sorted(set(series) - set(videos))
    if missing:
        raise GroupMoodError(f"predictions reference videos missing from the index: {missing[:5]}")
    aggregate = AGGREGATORS[args.agg]
    pairs = [(videos[vid].label, aggregate(s)) for vid, s in sorted(series.items())]
    report = compute_report(pairs)
    print(format_report(report, style=args.format))
    return 0


def cmd_schedule(args) -> int:
    cfg = load_config(args.config)
    videos = _filtered_videos(args.index, args.split)
    plans = build_schedule(cfg.schedule, videos, args.seed)
    text = json.dumps(schedule_to_json(plans), separators=(",", ":"))
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {len(plans)} epoch plans to {args.out}")
    else:
        print(text)
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "sample-frames": cmd_sample_frames,
    "evaluate": cmd_evaluate,
    "schedule": cmd_schedule,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except GroupMoodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
