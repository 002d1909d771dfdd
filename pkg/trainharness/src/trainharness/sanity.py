"""Two-class sanity experiment: can a small model learn "happy group or not"
from generated scenes before anyone invests in real training runs?

Scenes restrict face emotions to happiness vs one negative class with odd face
counts, so labels are Positive or Negative (the generator's overcrowding
retries can drop a face and produce the odd tie scene, which gets filtered
out). Both splits are balanced by construction: a collapsed classifier scores
exactly 0.5, so held-out accuracy well above that demonstrates real signal and
the shuffled-label control must fall back to chance.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from trainharness import HarnessError
from trainharness.data import batches, load_dataset_dir, run_groupmood
from trainharness.models import HeadSpec, build_model
from trainharness.train import TrainConfig, _epoch_pass

SANITY_CONFIG = """
schema_version = 1

[generation]
render_size = [224, 224]
min_faces = 1
max_faces = 9
face_count_weights = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]
face_height_range = [0.18, 0.22]
emotion_weights = {{ happiness = 1.0, {negative} = 1.0 }}

[augment]
flip_prob = 0.5
rotate_prob = 0.5
rotate_max_degrees = 10.0
scale_prob = 0.0
translate_prob = 0.0
shear_prob = 0.0
perspective_prob = 0.0
elastic_prob = 0.0
brightness_prob = 0.0
contrast_prob = 0.0
"""


@dataclass(frozen=True)
class SanityConfig:
    train_count: int = 192
    test_count: int = 160
    epochs: int = 40
    learning_rate: float = 0.02
    batch_size: int = 16
    seed: int = 0
    negative_emotion: str = "anger"
    input_size: int = 112


@dataclass(frozen=True)
class SanityResult:
    accuracy: float
    model: object
    test_samples: list


def generate_balanced_two_class(catalog_dir, out_dir, count: int, seed: int, cfg: SanityConfig):
    """Generate scenes and return a label-balanced subset of `count` samples."""
    if count % 2:
        raise HarnessError("balanced sample count must be even")
    config_path = Path(out_dir).parent / f"sanity-{Path(out_dir).name}.toml"
    config_path.parent.mkdir(parents=True, exist_ok=True)
    config_path.write_text(SANITY_CONFIG.format(negative=cfg.negative_emotion))
    raw_count = int(count * 1.5) + 16  # headroom for balancing and tie filtering
    run_groupmood(
        [
            "generate", str(config_path), "--catalog", str(catalog_dir),
            "--out", str(out_dir), "--count", str(raw_count), "--seed", str(seed),
            "--workers", "2",
        ]
    )
    samples = load_dataset_dir(out_dir)
    per_class = count // 2
    negative = [s for s in samples if s.label == 0][:per_class]
    positive = [s for s in samples if s.label == 2][:per_class]
    if len(negative) < per_class or len(positive) < per_class:
        raise HarnessError(
            f"could not balance {count} samples from {raw_count} scenes "
            f"({len(negative)} negative / {len(positive)} positive available)"
        )
    out = []
    for a, b in zip(negative, positive):
        out += [a, b]
    return out


def _binary_accuracy(model, samples, cfg: SanityConfig) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for x, y in batches(samples, cfg.batch_size, None, cfg.input_size):
            correct += int((model(x).argmax(dim=1) == y).sum())
    return correct / len(samples)


def run_sanity_experiment(
    catalog_dir,
    cfg: SanityConfig | None = None,
    shuffle_labels: bool = False,
    work_dir=None,
) -> SanityResult:
    """Train on generated two-class scenes and score the held-out split.

    shuffle_labels destroys the label/image association (the control run):
    held-out accuracy should then sit at chance.
    """
    cfg = cfg or SanityConfig()
    if work_dir is None:
        work_dir = tempfile.mkdtemp(prefix="sanity-")
    work = Path(work_dir)

    train = generate_balanced_two_class(catalog_dir, work / "train", cfg.train_count, cfg.seed, cfg)
    test = generate_balanced_two_class(
        catalog_dir, work / "test", cfg.test_count, cfg.seed + 10_000, cfg
    )

    if shuffle_labels:
        # stratified permutation: exactly half of each class keeps its label,
        # so the empirical label/image correlation is zero by construction
        # (a plain permutation leaves O(1/sqrt(n)) residual correlation that a
        # memorizing model amplifies into off-chance held-out accuracy)
        rng = np.random.default_rng(cfg.seed)
        shuffled = []
        for cls in (0, 2):
            group = [s for s in train if s.label == cls]
            order = rng.permutation(len(group))
            half = len(group) // 2
            for rank, idx in enumerate(order):
                label = cls if rank < half else 2 - cls
                shuffled.append(type(group[idx])(group[idx].image, label))
        order = rng.permutation(len(shuffled))
        train = [shuffled[i] for i in order]

    torch.manual_seed(cfg.seed)
    model = build_model("smallcnn", HeadSpec((64, 3), 0.25), random_init=True)
    optimizer = torch.optim.SGD(model.parameters(), lr=cfg.learning_rate, momentum=0.9)
    generator = torch.Generator().manual_seed(cfg.seed)
    train_cfg = TrainConfig(
        learning_rate=cfg.learning_rate, batch_size=cfg.batch_size, input_size=cfg.input_size
    )
    for _ in range(cfg.epochs):
        _epoch_pass(model, train, train_cfg, optimizer, generator)
    return SanityResult(_binary_accuracy(model, test, cfg), model, test)
