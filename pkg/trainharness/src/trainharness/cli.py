"""Harness CLI: schedule-driven training, the two-class sanity check, and
Score-CAM heatmap rendering."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from trainharness import HarnessError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trainharness")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="fine-tune through an epoch schedule")
    tr.add_argument("schedule", help="schedule JSON from `groupmood schedule`")
    tr.add_argument("--out", required=True, help="run directory (metrics, checkpoints)")
    tr.add_argument("--synthetic-dir", help="generated dataset directory")
    tr.add_argument("--stream-cmd", help="command emitting the framed record stream")
    tr.add_argument("--index", help="video index CSV for real-frame refs")
    tr.add_argument("--val-index", help="video index CSV for validation")
    tr.add_argument("--backbone", default="smallcnn")
    tr.add_argument("--weights", help="checkpoint to resume from")
    tr.add_argument("--lr", type=float, default=0.001)
    tr.add_argument("--momentum", type=float, default=0.9)
    tr.add_argument("--batch-size", type=int, default=16)
    tr.add_argument("--seed", type=int, default=0)

    sa = sub.add_parser("sanity", help="two-class learnability experiment")
    sa.add_argument("catalog", help="asset catalog directory")
    sa.add_argument("--out", help="work directory")
    sa.add_argument("--shuffle-control", action="store_true")
    sa.add_argument("--epochs", type=int, default=40)
    sa.add_argument("--train-count", type=int, default=256)
    sa.add_argument("--test-count", type=int, default=200)
    sa.add_argument("--seed", type=int, default=0)

    sc = sub.add_parser("scorecam", help="render a class-activation heatmap PNG")
    sc.add_argument("weights", help="model checkpoint")
    sc.add_argument("image", help="input image (resized to 224x224)")
    sc.add_argument("--target", type=int, required=True, help="class index 0/1/2")
    sc.add_argument("--backbone", default="smallcnn")
    sc.add_argument("--out", required=True, help="heatmap PNG path")
    return parser


def cmd_train(args) -> int:
    from trainharness.models import build_model
    from trainharness.train import DataSources, TrainConfig, load_schedule, train_loop

    model = build_model(args.backbone, weights_path=args.weights, random_init=args.weights is None)
    sources = DataSources(
        synthetic_dir=args.synthetic_dir,
        stream_command=args.stream_cmd,
        index_csv=args.index,
        val_index_csv=args.val_index,
    )
    cfg = TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    metrics = train_loop(model, load_schedule(args.schedule), sources, cfg, args.out)
    last = metrics[-1]
    print(
        f"finished epoch {last['epoch']} ({last['phase']}): "
        f"loss {last['train_loss']:.4f}, train accuracy {last['train_accuracy']:.3f}"
    )
    return 0


def cmd_sanity(args) -> int:
    from trainharness.sanity import SanityConfig, run_sanity_experiment

    cfg = SanityConfig(
        train_count=args.train_count,
        test_count=args.test_count,
        epochs=args.epochs,
        seed=args.seed,
    )
    result = run_sanity_experiment(
        args.catalog, cfg, shuffle_labels=args.shuffle_control, work_dir=args.out
    )
    kind = "shuffled-label control" if args.shuffle_control else "two-class sanity"
    print(f"{kind} held-out accuracy: {result.accuracy:.3f}")
    return 0


def cmd_scorecam(args) -> int:
    import cv2
    import numpy as np

    from trainharness.data import read_png, to_tensor
    from trainharness.models import build_model
    from trainharness.scorecam import score_cam

    model = build_model(args.backbone, weights_path=args.weights)
    image = to_tensor(read_png(args.image))
    heatmap, degenerate = score_cam(model, image, args.target)
    colored = cv2.applyColorMap((heatmap * 255).astype(np.uint8), cv2.COLORMAP_JET)
    if not cv2.imwrite(str(Path(args.out)), colored):
        raise HarnessError(f"cannot write {args.out}")
    print(f"wrote heatmap to {args.out}" + (" (degenerate: all-zero)" if degenerate else ""))
    return 0


_COMMANDS = {"train": cmd_train, "sanity": cmd_sanity, "scorecam": cmd_scorecam}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
