"""Real-video frame sampling, epoch schedules and frame extraction.

Videos are addressed through an index CSV (video_id,path,frame_count,label,split)
so the package never ships or assumes any particular dataset. Frame decoding is
delegated to an external subprocess; see DECODER_CONTRACT.
"""

from __future__ import annotations

import csv
import json
import os
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from groupmood.compose import decode_png, encode_png
from groupmood.core import GroupClass, GroupMoodError, Seed

DECODER_ENV = "GROUPMOOD_DECODER"

DECODER_CONTRACT = (
    "decoder <video-path> <frame-index>  ->  PNG bytes of that frame on stdout, "
    "nonzero exit status on failure"
)

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    path: str
    frame_count: int
    label: GroupClass
    split: str

    def __post_init__(self):
        if self.frame_count < 1:
            raise GroupMoodError(f"video {self.video_id!r}: frame_count must be >= 1")
        if self.split not in SPLITS:
            raise GroupMoodError(f"video {self.video_id!r}: split must be one of {SPLITS}")


@dataclass(frozen=True)
class EpochPlan:
    epoch_index: int
    phase: str  # "mixed" | "real-only"
    synthetic_count: int
    real_frame_refs: tuple  # of (video_id, frame_index)

    def __post_init__(self):
        if self.phase == "mixed" and self.synthetic_count <= 0:
            raise GroupMoodError("mixed epochs must have synthetic_count > 0")
        if self.phase == "real-only" and self.synthetic_count != 0:
            raise GroupMoodError("real-only epochs must have synthetic_count == 0")

    def to_json(self) -> dict:
        return {
            "epoch": self.epoch_index,
            "phase": self.phase,
            "synthetic_count": self.synthetic_count,
            "real_frames": [[v, int(i)] for v, i in self.real_frame_refs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EpochPlan":
        return cls(
            obj["epoch"],
            obj["phase"],
            obj["synthetic_count"],
            tuple((v, int(i)) for v, i in obj["real_frames"]),
        )


@dataclass(frozen=True)
class ScheduleConfig:
    mixed_epochs: int = 10
    mixed_synthetic: int = 10_000
    mixed_real: int = 10_000
    real_only_epochs: int = 10
    real_only_frames: int = 20_000

    def validate(self) -> None:
        if self.mixed_epochs < 0 or self.real_only_epochs < 0:
            raise GroupMoodError("epoch counts must be >= 0")
        if self.mixed_epochs > 0 and (self.mixed_synthetic < 1 or self.mixed_real < 0):
            raise GroupMoodError("mixed epochs need mixed_synthetic >= 1 and mixed_real >= 0")
        if self.real_only_epochs > 0 and self.real_only_frames < 1:
            raise GroupMoodError("real-only epochs need real_only_frames >= 1")
        if self.mixed_epochs == 0 and self.real_only_epochs == 0:
            raise GroupMoodError("schedule has no epochs")


def load_video_index(path) -> list:
    """Parse the video index CSV, validating every row."""
    records = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"video_id", "path", "frame_count", "label", "split"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise GroupMoodError(
                f"video index {path}: header must contain {sorted(required)}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                rec = VideoRecord(
                    row["video_id"],
                    row["path"],
                    int(row["frame_count"]),
                    GroupClass.parse(row["label"]),
                    row["split"],
                )
            except (GroupMoodError, ValueError) as exc:
                raise GroupMoodError(f"video index {path} line {lineno}: {exc}") from None
            if rec.video_id in seen:
                raise GroupMoodError(f"video index {path} line {lineno}: duplicate id {rec.video_id!r}")
            seen.add(rec.video_id)
            records.append(rec)
    if not records:
        raise GroupMoodError(f"video index {path} has no rows")
    return records


def sample_frames(videos, k: int, seed: Seed) -> list:
    """Draw k frames uniformly (with replacement) from the pooled frame set.

    Every frame of every video has equal probability, so longer videos
    contribute proportionally more samples.
    """
    if not videos:
        raise GroupMoodError("cannot sample frames from an empty video list")
    if k < 1:
        raise GroupMoodError("k must be >= 1")
    counts = np.array([v.frame_count for v in videos], dtype=np.int64)
    offsets = np.cumsum(counts)
    total = int(offsets[-1])
    draws = seed.rng().integers(0, total, size=k)
    vid_idx = np.searchsorted(offsets, draws, side="right")
    starts = offsets - counts
    return [
        (videos[int(v)].video_id, int(d - starts[int(v)])) for v, d in zip(vid_idx, draws)
    ]


def build_schedule(cfg: ScheduleConfig, videos, seed: Seed) -> list:
    """Expand a schedule config into per-epoch plans with concrete frame refs."""
    cfg.validate()
    plans = []
    epoch = 0
    for _ in range(cfg.mixed_epochs):
        epoch += 1
        refs = (
            tuple(sample_frames(videos, cfg.mixed_real, seed.child(epoch)))
            if cfg.mixed_real > 0
            else ()
        )
        plans.append(EpochPlan(epoch, "mixed", cfg.mixed_synthetic, refs))
    for _ in range(cfg.real_only_epochs):
        epoch += 1
        refs = tuple(sample_frames(videos, cfg.real_only_frames, seed.child(epoch)))
        plans.append(EpochPlan(epoch, "real-only", 0, refs))
    return plans


def schedule_to_json(plans) -> dict:
    return {"epochs": [p.to_json() for p in plans]}


def decoder_command() -> list:
    """Frame decoder argv prefix; GROUPMOOD_DECODER overrides the built-in one."""
    override = os.environ.get(DECODER_ENV)
    if override:
        return [override]
    return [sys.executable, "-m", "groupmood.framedecode"]


def extract_frame(video: VideoRecord, frame_index: int) -> np.ndarray:
    """Decode one frame as an RGB raster via the decoder subprocess."""
    if not 0 <= frame_index < video.frame_count:
        raise GroupMoodError(
            f"frame index {frame_index} out of range for video {video.video_id!r} "
            f"({video.frame_count} frames)"
        )
    cmd = decoder_command() + [video.path, str(frame_index)]
    proc = subprocess.run(cmd, capture_output=True)
    if proc.returncode != 0:
        detail = proc.stderr.decode(errors="replace").strip()
        raise GroupMoodError(
            f"decoder failed for video {video.video_id!r} frame {frame_index}: {detail}"
        )
    try:
        return decode_png(proc.stdout)
    except GroupMoodError:
        raise GroupMoodError(
            f"decoder produced invalid PNG for video {video.video_id!r} frame {frame_index}"
        ) from None


def write_sampled_frames(videos, refs, out_dir) -> list:
    """Extract the referenced frames to <out>/frames/ plus a samples.jsonl listing.

    Returns the record dicts in draw order.
    TODO: batch decoder invocations per video for large k.
    """
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    by_id = {v.video_id: v for v in videos}
    records = []
    with open(out / "samples.jsonl", "w") as fh:
        for video_id, frame_index in refs:
            video = by_id[video_id]
            frame = extract_frame(video, frame_index)
            name = f"{video_id}_{frame_index:06d}.png"
            (out / "frames" / name).write_bytes(encode_png(frame))
            rec = {
                "video_id": video_id,
                "frame_index": frame_index,
                "label": video.label.label_name,
                "file": f"frames/{name}",
            }
            records.append(rec)
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return records
