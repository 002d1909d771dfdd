"""groupmood: deterministic synthetic group-emotion scene generation and evaluation."""

from groupmood.core import (
    Emotion,
    GroupClass,
    GroupMoodError,
    Seed,
    compute_group_label,
    derive_seed,
    map_emotion_to_class,
)

__version__ = "0.1.0"

__all__ = [
    "Emotion",
    "GroupClass",
    "GroupMoodError",
    "Seed",
    "compute_group_label",
    "derive_seed",
    "map_emotion_to_class",
    "__version__",
]
