"""Shared domain types: emotions, group classes, label rule, seed derivation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class GroupMoodError(Exception):
    """Base class for all domain errors raised by this package."""


class Emotion(enum.Enum):
    ANGER = "anger"
    FEAR = "fear"
    DISGUST = "disgust"
    SADNESS = "sadness"
    HAPPINESS = "happiness"
    SURPRISE = "surprise"
    NEUTRAL = "neutral"

    @classmethod
    def parse(cls, token: str) -> "Emotion":
        try:
            return cls(token.lower())
        except ValueError:
            raise GroupMoodError(f"unknown emotion token: {token!r}") from None


NEGATIVE_EMOTIONS = frozenset(
    {Emotion.ANGER, Emotion.FEAR, Emotion.DISGUST, Emotion.SADNESS}
)


class GroupClass(enum.IntEnum):
    """Scene-level valence class. Integer encoding is stable across all file formats."""

    NEGATIVE = 0
    NEUTRAL = 1
    POSITIVE = 2

    @property
    def label_name(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, token: str) -> "GroupClass":
        try:
            return cls[token.upper()]
        except KeyError:
            raise GroupMoodError(f"unknown group class: {token!r}") from None


def map_emotion_to_class(
    emotion: Emotion, surprise_class: GroupClass = GroupClass.NEUTRAL
) -> GroupClass:
    """Map a single face emotion to its group class.

    The four negative emotions map to NEGATIVE, happiness to POSITIVE and
    neutral to NEUTRAL. Surprise has no canonical class and maps to
    ``surprise_class`` (NEUTRAL unless configured otherwise).
    """
    if emotion in NEGATIVE_EMOTIONS:
        return GroupClass.NEGATIVE
    if emotion is Emotion.HAPPINESS:
        return GroupClass.POSITIVE
    if emotion is Emotion.NEUTRAL:
        return GroupClass.NEUTRAL
    return surprise_class


def compute_group_label(counts: dict[GroupClass, int]) -> GroupClass:
    """Label a scene from its per-class face counts.

    Returns the class with a strict maximum count. When two or more classes
    tie for the maximum the label falls back to NEUTRAL.
    """
    total = sum(counts.values())
    if total < 1:
        raise GroupMoodError("cannot label a scene with no faces")
    if any(v < 0 for v in counts.values()):
        raise GroupMoodError("negative count in label histogram")
    ordered = sorted(GroupClass, key=lambda c: counts.get(c, 0), reverse=True)
    best, runner_up = ordered[0], ordered[1]
    if counts.get(best, 0) > counts.get(runner_up, 0):
        return best
    return GroupClass.NEUTRAL


@dataclass(frozen=True)
class Seed:
    """Counter-derived random seed: a 64-bit root plus a path of child indices.

    Children are derived by appending an index to the path, so disjoint paths
    give statistically independent streams and derivation order never matters.
    Backed by numpy's SeedSequence (root as entropy, path as spawn key), which
    is stable across platforms and runs.
    """

    root: int
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 <= self.root < 2**64:
            raise GroupMoodError("seed root must be a 64-bit unsigned integer")
        if any(i < 0 or i >= 2**32 for i in self.path):
            raise GroupMoodError("seed path entries must be 32-bit unsigned integers")

    def child(self, index: int) -> "Seed":
        if index < 0:
            raise GroupMoodError("seed child index must be >= 0")
        return Seed(self.root, self.path + (index,))

    def sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.root, spawn_key=self.path)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.sequence())

    def state_key(self) -> tuple[int, ...]:
        """128-bit fingerprint of the derived stream, for distinctness checks."""
        return tuple(int(w) for w in self.sequence().generate_state(4))

    def to_json(self) -> dict:
        return {"root": self.root, "path": list(self.path)}

    @classmethod
    def from_json(cls, obj: dict) -> "Seed":
        return cls(int(obj["root"]), tuple(int(i) for i in obj["path"]))


def derive_seed(seed: Seed, index: int) -> Seed:
    """Pure child-seed derivation; equal (seed, index) always gives equal seeds."""
    return seed.child(index)
