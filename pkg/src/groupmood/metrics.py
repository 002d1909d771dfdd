"""Frame-to-video score aggregation and classification metrics.

Aggregation ties resolve to NEUTRAL, mirroring the scene label rule, so a
video split evenly between positive and negative frames reads as neutral.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from groupmood.core import GroupClass, GroupMoodError

_CLASS_ORDER = (GroupClass.NEGATIVE, GroupClass.NEUTRAL, GroupClass.POSITIVE)

# report rows follow the conventional Neutral/Positive/Negative presentation
_TABLE_ORDER = (GroupClass.NEUTRAL, GroupClass.POSITIVE, GroupClass.NEGATIVE)


@dataclass(frozen=True)
class ScoreSeries:
    video_id: str
    scores: np.ndarray  # (n_frames, 3) non-negative

    def __post_init__(self):
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
            raise GroupMoodError(f"video {self.video_id!r}: scores must be a non-empty (n, 3) array")
        if (arr < 0).any():
            raise GroupMoodError(f"video {self.video_id!r}: scores must be >= 0")
        object.__setattr__(self, "scores", arr)


def _argmax_class(vec: np.ndarray) -> GroupClass:
    top = vec.max()
    winners = [c for c, v in zip(_CLASS_ORDER, vec) if v == top]
    return winners[0] if len(winners) == 1 else GroupClass.NEUTRAL


def aggregate_average(series: ScoreSeries):
    """Mean score vector over frames and its class (ties -> NEUTRAL)."""
    mean = series.scores.mean(axis=0)
    return _argmax_class(mean), mean


def aggregate_vote(series: ScoreSeries) -> GroupClass:
    """Per-frame argmax then majority vote (ties -> NEUTRAL at both stages)."""
    votes = np.zeros(3)
    for row in series.scores:
        votes[int(_argmax_class(row))] += 1
    return _argmax_class(votes)


AGGREGATORS = {
    "average": lambda s: aggregate_average(s)[0],
    "vote": aggregate_vote,
}


@dataclass(frozen=True)
class EvalReport:
    confusion: np.ndarray  # (3, 3) counts, rows = true, cols = predicted
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class_accuracy: np.ndarray
    overall_accuracy: float
    degenerate: tuple = field(default=())  # metric cells that were 0/0

    def to_json(self) -> dict:
        names = [c.label_name for c in _CLASS_ORDER]
        return {
            "classes": names,
            "confusion": self.confusion.astype(int).tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class_accuracy": self.per_class_accuracy.tolist(),
            "overall_accuracy": self.overall_accuracy,
            "degenerate": list(self.degenerate),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvalReport":
        return cls(
            np.array(obj["confusion"], dtype=np.int64),
            np.array(obj["precision"]),
            np.array(obj["recall"]),
            np.array(obj["f1"]),
            obj["macro_precision"],
            obj["macro_recall"],
            obj["macro_f1"],
            np.array(obj["per_class_accuracy"]),
            obj["overall_accuracy"],
            tuple(obj["degenerate"]),
        )

    def __eq__(self, other):
        if not isinstance(other, EvalReport):
            return NotImplemented
        return self.to_json() == other.to_json()


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def confusion_matrix(pairs) -> np.ndarray:
    mat = np.zeros((3, 3), dtype=np.int64)
    for truth, predicted in pairs:
        mat[int(truth), int(predicted)] += 1
    return mat


def report_from_confusion(confusion: np.ndarray) -> EvalReport:
    confusion = np.asarray(confusion, dtype=np.int64)
    if confusion.shape != (3, 3) or (confusion < 0).any() or confusion.sum() < 1:
        raise GroupMoodError("confusion matrix must be 3x3, non-negative and non-empty")
    tp = np.diag(confusion).astype(np.float64)
    col = confusion.sum(axis=0).astype(np.float64)
    row = confusion.sum(axis=1).astype(np.float64)

    degenerate = []
    precision = np.zeros(3)
    recall = np.zeros(3)
    for i, cls in enumerate(_CLASS_ORDER):
        if col[i] > 0:
            precision[i] = tp[i] / col[i]
        else:
            degenerate.append(f"precision[{cls.label_name}]")
        if row[i] > 0:
            recall[i] = tp[i] / row[i]
        else:
            degenerate.append(f"recall[{cls.label_name}]")
    f1 = np.array([f1_score(p, r) for p, r in zip(precision, recall)])
    for i, cls in enumerate(_CLASS_ORDER):
        if precision[i] + recall[i] == 0:
            degenerate.append(f"f1[{cls.label_name}]")

    return EvalReport(
        confusion=confusion,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        per_class_accuracy=recall.copy(),
        overall_accuracy=float(tp.sum() / confusion.sum()),
        degenerate=tuple(degenerate),
    )


def compute_report(pairs) -> EvalReport:
    """Standard precision/recall/F1 report from (true, predicted) pairs.

    Macro metrics are unweighted class means; macro F1 averages the per-class
    F1 values (not the F1 of the macro precision/recall). 0/0 cells report 0
    and are listed in `degenerate`.
    """
    pairs = list(pairs)
    if not pairs:
        raise GroupMoodError("cannot compute a report from zero predictions")
    return report_from_confusion(confusion_matrix(pairs))


def format_report(report: EvalReport, style: str = "table") -> str:
    if style == "json":
        return json.dumps(report.to_json(), indent=2)
    if style != "table":
        raise GroupMoodError(f"unknown report style {style!r}")

    def cell(value: float, tag: str) -> str:
        mark = "*" if tag in report.degenerate else ""
        return f"{value:.2f}{mark}"

    rows = [("Class", "Precision", "Recall", "F1-score")]
    for cls in _TABLE_ORDER:
        i = int(cls)
        rows.append(
            (
                cls.label_name.capitalize(),
                cell(report.precision[i], f"precision[{cls.label_name}]"),
                cell(report.recall[i], f"recall[{cls.label_name}]"),
                cell(report.f1[i], f"f1[{cls.label_name}]"),
            )
        )
    rows.append(
        (
            "Mean value",
            f"{report.macro_precision:.2f}",
            f"{report.macro_recall:.2f}",
            f"{report.macro_f1:.2f}",
        )
    )
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in rows]
    lines.append(f"Overall accuracy: {report.overall_accuracy:.4f}")
    if report.degenerate:
        lines.append("* undefined (0/0), reported as 0")
    return "\n".join(lines)


def load_predictions(path) -> dict:
    """Read frame predictions JSONL into {video_id: ScoreSeries}.

    Lines look like {"video_id": ..., "frame_index": ..., "scores": [s0, s1, s2]};
    frames are ordered by frame_index within each video.
    """
    by_video: dict[str, list] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                video_id = obj["video_id"]
                frame_index = int(obj["frame_index"])
                scores = [float(s) for s in obj["scores"]]
                if len(scores) != 3:
                    raise ValueError("scores must have exactly 3 entries")
            except (ValueError, KeyError, TypeError) as exc:
                raise GroupMoodError(f"predictions {path} line {lineno}: {exc}") from None
            by_video.setdefault(video_id, []).append((frame_index, scores))
    if not by_video:
        raise GroupMoodError(f"predictions {path} has no records")
    return {
        vid: ScoreSeries(vid, np.array([s for _, s in sorted(rows)], dtype=np.float64))
        for vid, rows in by_video.items()
    }
