"""Data access for the harness, strictly through the generator's public
surfaces: dataset directories (manifest.jsonl + images/), the framed byte
stream of `groupmood generate --stream`, the video index CSV, and the frame
decoder subprocess contract.
"""

from __future__ import annotations

import csv
import json
import os
import shutil
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
import torch

from trainharness import HarnessError

LABEL_NAMES = ("negative", "neutral", "positive")

DECODER_ENV = "GROUPMOOD_DECODER"


def groupmood_command() -> list:
    """Argv prefix for the generator CLI (GROUPMOOD_CLI overrides)."""
    override = os.environ.get("GROUPMOOD_CLI")
    if override:
        return [override]
    exe = shutil.which("groupmood")
    if exe:
        return [exe]
    return [sys.executable, "-m", "groupmood.cli"]


def run_groupmood(args, **kwargs) -> subprocess.CompletedProcess:
    proc = subprocess.run(groupmood_command() + list(args), capture_output=True, **kwargs)
    if proc.returncode != 0:
        raise HarnessError(
            f"groupmood {args[0]} failed ({proc.returncode}): {proc.stderr.decode(errors='replace')}"
        )
    return proc


def read_png(path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if raw is None:
        raise HarnessError(f"unreadable image: {path}")
    return cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)


def decode_png_bytes(data: bytes) -> np.ndarray:
    raw = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_COLOR)
    if raw is None:
        raise HarnessError("invalid PNG payload")
    return cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)


def to_tensor(rgb: np.ndarray, size: int = 224) -> torch.Tensor:
    """HWC uint8 RGB -> float CHW in [0, 1], resized to size x size."""
    t = torch.from_numpy(np.ascontiguousarray(rgb)).permute(2, 0, 1).float() / 255.0
    if t.shape[1] != size or t.shape[2] != size:
        t = torch.nn.functional.interpolate(
            t.unsqueeze(0), size=(size, size), mode="bilinear", align_corners=False
        ).squeeze(0)
    return t


@dataclass(frozen=True)
class Sample:
    image: np.ndarray  # HWC uint8 RGB
    label: int  # 0 negative / 1 neutral / 2 positive


def load_dataset_dir(dataset_dir, limit: int | None = None) -> list:
    """Read (image, label) samples from a generated dataset directory."""
    root = Path(dataset_dir)
    manifest = root / "manifest.jsonl"
    if not manifest.is_file():
        raise HarnessError(f"no manifest.jsonl under {root}")
    samples = []
    with open(manifest) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            samples.append(
                Sample(read_png(root / "images" / f"{rec['scene_id']}.png"), int(rec["label"]))
            )
            if limit is not None and len(samples) >= limit:
                break
    if not samples:
        raise HarnessError(f"dataset {root} is empty")
    return samples


def iter_stream_records(fileobj):
    """Parse the generator's framed stream: 4-byte BE length, then the manifest
    JSON line (newline-terminated) followed by PNG bytes."""
    while True:
        header = fileobj.read(4)
        if not header:
            return
        if len(header) < 4:
            raise HarnessError("stream truncated inside a record header")
        n = int.from_bytes(header, "big")
        payload = fileobj.read(n)
        if payload is None or len(payload) < n:
            raise HarnessError("stream truncated inside a record payload")
        line, _, png = payload.partition(b"\n")
        yield json.loads(line.decode()), png


def stream_samples(fileobj, count: int | None = None):
    """Yield Samples from a framed stream, optionally stopping after count."""
    got = 0
    for record, png in iter_stream_records(fileobj):
        yield Sample(decode_png_bytes(png), int(record["label"]))
        got += 1
        if count is not None and got >= count:
            return
    if count is not None and got < count:
        raise HarnessError(f"stream ended after {got}/{count} records")


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    path: str
    frame_count: int
    label: int
    split: str


def load_video_index(path) -> list:
    entries = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                entries.append(
                    VideoEntry(
                        row["video_id"],
                        row["path"],
                        int(row["frame_count"]),
                        LABEL_NAMES.index(row["label"]),
                        row["split"],
                    )
                )
            except (KeyError, ValueError) as exc:
                raise HarnessError(f"video index {path} line {lineno}: {exc}") from None
    if not entries:
        raise HarnessError(f"video index {path} has no rows")
    return entries


class FrameClient:
    """Decodes (video_id, frame_index) refs via the decoder subprocess contract,
    with an in-memory cache so repeated refs cost one decode."""

    def __init__(self, videos):
        self.by_id = {v.video_id: v for v in videos}
        self._cache = {}

    def _decoder(self) -> list:
        override = os.environ.get(DECODER_ENV)
        if override:
            return [override]
        return [sys.executable, "-m", "groupmood.framedecode"]

    def fetch(self, video_id: str, frame_index: int) -> np.ndarray:
        key = (video_id, frame_index)
        if key in self._cache:
            return self._cache[key]
        video = self.by_id.get(video_id)
        if video is None:
            raise HarnessError(f"video {video_id!r} not in the index")
        proc = subprocess.run(
            self._decoder() + [video.path, str(frame_index)], capture_output=True
        )
        if proc.returncode != 0:
            raise HarnessError(
                f"decoder failed for {video_id}#{frame_index}: "
                f"{proc.stderr.decode(errors='replace').strip()}"
            )
        frame = decode_png_bytes(proc.stdout)
        self._cache[key] = frame
        return frame

    def label(self, video_id: str) -> int:
        return self.by_id[video_id].label


def batches(samples, batch_size: int, generator: torch.Generator | None = None, size: int = 224):
    """Yield (inputs, labels) tensors; shuffles when a torch Generator is given."""
    order = list(range(len(samples)))
    if generator is not None:
        order = torch.randperm(len(samples), generator=generator).tolist()
    for start in range(0, len(order), batch_size):
        chunk = [samples[i] for i in order[start : start + batch_size]]
        x = torch.stack([to_tensor(s.image, size) for s in chunk])
        y = torch.tensor([s.label for s in chunk], dtype=torch.long)
        yield x, y
