"""Schedule-driven fine-tuning loop.

Each epoch plan names a phase (mixed or real-only), a synthetic image count
and explicit real-frame references. Synthetic images come from a generated
dataset directory or from a live `groupmood generate --stream` subprocess;
real frames are resolved through the decoder contract. Per-epoch metrics go
to metrics.jsonl and a checkpoint is written after every epoch, so a killed
run resumes from the last finished epoch.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch import nn

from trainharness import HarnessError
from trainharness.data import (
    FrameClient,
    Sample,
    batches,
    load_dataset_dir,
    load_video_index,
    run_groupmood,
    stream_samples,
    to_tensor,
)
from trainharness.models import save_checkpoint


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 16
    seed: int = 0
    input_size: int = 224
    stop_at_train_accuracy: float | None = None
    val_frames_per_video: int = 4

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise HarnessError("learning rate must be positive")
        if self.batch_size < 1:
            raise HarnessError("batch size must be >= 1")


@dataclass
class DataSources:
    """Where epoch plans get their samples.

    synthetic_dir: dataset directory (manifest.jsonl + images/), or
    stream_command: shell command whose stdout is the framed record stream.
    index_csv + decoder env resolve the plans' real-frame refs; val_index_csv
    enables per-epoch validation through `groupmood evaluate`.
    """

    synthetic_dir: str | None = None
    stream_command: str | None = None
    index_csv: str | None = None
    val_index_csv: str | None = None
    _frames: FrameClient = field(default=None, repr=False)

    def synthetic(self, count: int):
        if count == 0:
            return []
        if self.synthetic_dir is not None:
            return load_dataset_dir(self.synthetic_dir, limit=count)
        if self.stream_command is not None:
            proc = subprocess.Popen(
                shlex.split(self.stream_command), stdout=subprocess.PIPE
            )
            try:
                samples = list(stream_samples(proc.stdout, count))
            finally:
                proc.stdout.close()
                proc.terminate()
                proc.wait()
            return samples
        raise HarnessError("epoch needs synthetic data but no synthetic source configured")

    def real(self, refs):
        if not refs:
            return []
        if self.index_csv is None:
            raise HarnessError("epoch has real-frame refs but no index_csv configured")
        if self._frames is None:
            self._frames = FrameClient(load_video_index(self.index_csv))
        out = []
        for video_id, frame_index in refs:
            frame = self._frames.fetch(video_id, int(frame_index))
            out.append(Sample(frame, self._frames.label(video_id)))
        return out


def load_schedule(path) -> list:
    with open(path) as fh:
        obj = json.load(fh)
    epochs = obj.get("epochs")
    if not epochs:
        raise HarnessError(f"schedule {path} has no epochs")
    return epochs


def _epoch_pass(model, samples, cfg, optimizer, generator):
    criterion = nn.CrossEntropyLoss()
    model.train()
    total, correct, loss_sum = 0, 0, 0.0
    first_batch_loss = None
    for x, y in batches(samples, cfg.batch_size, generator, cfg.input_size):
        optimizer.zero_grad()
        logits = model(x)
        loss = criterion(logits, y)
        loss.backward()
        optimizer.step()
        if first_batch_loss is None:
            first_batch_loss = loss.item()
        loss_sum += loss.item() * len(y)
        correct += int((logits.argmax(dim=1) == y).sum())
        total += len(y)
    return loss_sum / total, correct / total, first_batch_loss


def predict_videos(model, videos, frames: FrameClient, cfg: TrainConfig, out_path) -> None:
    """Score evenly spaced frames of each video into a predictions JSONL."""
    model.eval()
    with open(out_path, "w") as fh, torch.no_grad():
        for video in videos:
            n = min(cfg.val_frames_per_video, video.frame_count)
            step = max(1, video.frame_count // n)
            for frame_index in list(range(0, video.frame_count, step))[:n]:
                frame = frames.fetch(video.video_id, frame_index)
                scores = torch.softmax(model(to_tensor(frame, cfg.input_size).unsqueeze(0)), dim=1)[0]
                fh.write(
                    json.dumps(
                        {
                            "video_id": video.video_id,
                            "frame_index": frame_index,
                            "scores": [float(s) for s in scores],
                        }
                    )
                    + "\n"
                )


def evaluate_predictions(predictions_path, index_csv, agg: str = "average") -> dict:
    """Run the generator package's evaluate command and parse its JSON report."""
    proc = run_groupmood(
        ["evaluate", str(predictions_path), str(index_csv), "--agg", agg, "--format", "json"]
    )
    return json.loads(proc.stdout.decode())


def train_loop(model, schedule, sources: DataSources, cfg: TrainConfig, out_dir) -> list:
    """Train through the schedule; returns the metrics rows it also wrote.

    Writes metrics.jsonl (one row per epoch), checkpoint-NNN.pt after each
    epoch, and interrupt.pt when a stream dies mid-epoch so the run can resume.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    optimizer = torch.optim.SGD(model.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum)
    generator = torch.Generator().manual_seed(cfg.seed)

    val_videos = None
    val_frames = None
    if sources.val_index_csv is not None:
        val_videos = [v for v in load_video_index(sources.val_index_csv) if v.split == "val"]
        val_frames = FrameClient(val_videos)

    metrics = []
    with open(out / "metrics.jsonl", "w") as log:
        for plan in schedule:
            try:
                samples = sources.synthetic(int(plan["synthetic_count"])) + sources.real(
                    plan.get("real_frames", [])
                )
            except HarnessError:
                save_checkpoint(model, out / "interrupt.pt", {"epoch": plan["epoch"]})
                raise
            if not samples:
                raise HarnessError(f"epoch {plan['epoch']} has no samples")
            loss, accuracy, first_loss = _epoch_pass(model, samples, cfg, optimizer, generator)
            row = {
                "epoch": plan["epoch"],
                "phase": plan["phase"],
                "samples": len(samples),
                "train_loss": loss,
                "train_accuracy": accuracy,
                "first_batch_loss": first_loss,
            }
            if val_videos:
                preds = out / f"val-predictions-{plan['epoch']:03d}.jsonl"
                predict_videos(model, val_videos, val_frames, cfg, preds)
                report = evaluate_predictions(preds, sources.val_index_csv)
                row["val_accuracy"] = report["overall_accuracy"]
            log.write(json.dumps(row) + "\n")
            log.flush()
            metrics.append(row)
            save_checkpoint(model, out / f"checkpoint-{plan['epoch']:03d}.pt", {"epoch": plan["epoch"]})
            if (
                cfg.stop_at_train_accuracy is not None
                and accuracy >= cfg.stop_at_train_accuracy
            ):
                break
    return metrics
