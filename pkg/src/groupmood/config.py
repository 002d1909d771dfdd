"""TOML experiment configuration: schema, defaults and validation.

Unknown keys are rejected and every complaint carries the offending line
number where it can be found in the file, so configs stay diffable and typos
fail loudly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from groupmood.augment import AugmentRanges, FrameTransformConfig
from groupmood.catalog import CatalogLayout
from groupmood.chroma import ChromaParams
from groupmood.compose import GenConfig
from groupmood.core import Emotion, GroupClass, GroupMoodError
from groupmood.sample import ScheduleConfig

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Config:
    layout: CatalogLayout = field(default_factory=CatalogLayout)
    chroma: ChromaParams = field(default_factory=ChromaParams)
    generation: GenConfig = field(default_factory=GenConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    frame_transform: FrameTransformConfig = field(default_factory=FrameTransformConfig)

    def validate(self) -> None:
        self.layout.validate()
        self.chroma.validate()
        self.generation.validate()
        self.schedule.validate()
        self.frame_transform.validate()


class _Source:
    """Raw config text, for attaching line numbers to error messages."""

    def __init__(self, text: str, path):
        self.lines = text.splitlines()
        self.path = path

    def line_of(self, key: str) -> str:
        pattern = re.compile(r"(^|[\[\s\"'])" + re.escape(key) + r"([\]\s=.\"']|$)")
        for i, line in enumerate(self.lines, start=1):
            if pattern.search(line):
                return f"{self.path}:{i}"
        return str(self.path)

    def fail(self, key: str, message: str):
        raise GroupMoodError(f"{self.line_of(key)}: {message}")


def _check_keys(src: _Source, section: str, obj: dict, allowed) -> None:
    for key in obj:
        if key not in allowed:
            src.fail(key, f"unknown key {key!r} in [{section}]" if section else f"unknown top-level key {key!r}")


def _get(src, section, obj, key, types, default):
    if key not in obj:
        return default
    value = obj[key]
    if types is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, types) or isinstance(value, bool) and types is not bool:
        src.fail(key, f"[{section}] {key} has wrong type {type(value).__name__}")
    return value


def _pair(src, section, obj, key, default, kind=float):
    if key not in obj:
        return default
    value = obj[key]
    if not isinstance(value, list) or len(value) != 2:
        src.fail(key, f"[{section}] {key} must be a 2-element array")
    try:
        return (kind(value[0]), kind(value[1]))
    except (TypeError, ValueError):
        src.fail(key, f"[{section}] {key} entries must be {kind.__name__}")


def _parse_catalog(src, obj) -> CatalogLayout:
    allowed = {"label_mode", "token_map", "default_source", "source_token_map"}
    _check_keys(src, "catalog", obj, allowed)
    token_map = _get(src, "catalog", obj, "token_map", dict, {})
    source_token_map = _get(src, "catalog", obj, "source_token_map", dict, {})
    return CatalogLayout(
        label_mode=_get(src, "catalog", obj, "label_mode", str, "subdir"),
        token_map={str(k): str(v) for k, v in token_map.items()},
        default_source=_get(src, "catalog", obj, "default_source", str, "full-head"),
        source_token_map={str(k): str(v) for k, v in source_token_map.items()},
    )


def _parse_chroma(src, obj) -> ChromaParams:
    allowed = {"tolerance", "border_width", "border_spread_max", "on_uniform"}
    _check_keys(src, "chroma", obj, allowed)
    return ChromaParams(
        tolerance=_get(src, "chroma", obj, "tolerance", float, 50.0),
        border_width=_get(src, "chroma", obj, "border_width", int, 3),
        border_spread_max=_get(src, "chroma", obj, "border_spread_max", float, 40.0),
        on_uniform=_get(src, "chroma", obj, "on_uniform", str, "error"),
    )


def _parse_augment(src, obj) -> AugmentRanges:
    defaults = AugmentRanges()
    allowed = {
        "flip_prob", "rotate_prob", "rotate_max_degrees", "scale_prob", "scale_range",
        "translate_prob", "translate_max_frac", "shear_prob", "shear_max",
        "perspective_prob", "perspective_max_frac", "elastic_prob",
        "elastic_alpha_range", "elastic_sigma", "brightness_prob",
        "brightness_max_delta", "contrast_prob", "contrast_range",
    }
    _check_keys(src, "augment", obj, allowed)
    g = lambda key, default: _get(src, "augment", obj, key, float, default)
    return AugmentRanges(
        flip_prob=g("flip_prob", defaults.flip_prob),
        rotate_prob=g("rotate_prob", defaults.rotate_prob),
        rotate_max_degrees=g("rotate_max_degrees", defaults.rotate_max_degrees),
        scale_prob=g("scale_prob", defaults.scale_prob),
        scale_range=_pair(src, "augment", obj, "scale_range", defaults.scale_range),
        translate_prob=g("translate_prob", defaults.translate_prob),
        translate_max_frac=g("translate_max_frac", defaults.translate_max_frac),
        shear_prob=g("shear_prob", defaults.shear_prob),
        shear_max=g("shear_max", defaults.shear_max),
        perspective_prob=g("perspective_prob", defaults.perspective_prob),
        perspective_max_frac=g("perspective_max_frac", defaults.perspective_max_frac),
        elastic_prob=g("elastic_prob", defaults.elastic_prob),
        elastic_alpha_range=_pair(src, "augment", obj, "elastic_alpha_range", defaults.elastic_alpha_range),
        elastic_sigma=g("elastic_sigma", defaults.elastic_sigma),
        brightness_prob=g("brightness_prob", defaults.brightness_prob),
        brightness_max_delta=g("brightness_max_delta", defaults.brightness_max_delta),
        contrast_prob=g("contrast_prob", defaults.contrast_prob),
        contrast_range=_pair(src, "augment", obj, "contrast_range", defaults.contrast_range),
    )


def _parse_generation(src, obj, augment: AugmentRanges) -> GenConfig:
    defaults = GenConfig()
    allowed = {
        "render_size", "min_faces", "max_faces", "face_count_weights",
        "face_height_range", "max_placement_attempts", "occupancy_downsample",
        "min_face_px", "emotion_weights", "exclude_surprise", "surprise_class",
        "source_mix",
    }
    _check_keys(src, "generation", obj, allowed)

    weights_raw = _get(src, "generation", obj, "emotion_weights", dict, {})
    emotion_weights = {}
    for name, weight in weights_raw.items():
        try:
            emotion = Emotion.parse(str(name))
        except GroupMoodError as exc:
            src.fail(str(name), str(exc))
        if not isinstance(weight, (int, float)) or isinstance(weight, bool):
            src.fail(str(name), f"weight for {name!r} must be a number")
        emotion_weights[emotion] = float(weight)

    surprise_name = _get(src, "generation", obj, "surprise_class", str, "neutral")
    try:
        surprise_class = GroupClass.parse(surprise_name)
    except GroupMoodError as exc:
        src.fail("surprise_class", str(exc))

    counts = obj.get("face_count_weights", [])
    if not isinstance(counts, list):
        src.fail("face_count_weights", "[generation] face_count_weights must be an array")

    return GenConfig(
        render_size=_pair(src, "generation", obj, "render_size", defaults.render_size, int),
        min_faces=_get(src, "generation", obj, "min_faces", int, defaults.min_faces),
        max_faces=_get(src, "generation", obj, "max_faces", int, defaults.max_faces),
        face_count_weights=tuple(float(v) for v in counts),
        face_height_range=_pair(src, "generation", obj, "face_height_range", defaults.face_height_range),
        max_placement_attempts=_get(src, "generation", obj, "max_placement_attempts", int, defaults.max_placement_attempts),
        occupancy_downsample=_get(src, "generation", obj, "occupancy_downsample", int, defaults.occupancy_downsample),
        min_face_px=_get(src, "generation", obj, "min_face_px", int, defaults.min_face_px),
        emotion_weights=emotion_weights,
        exclude_surprise=_get(src, "generation", obj, "exclude_surprise", bool, False),
        surprise_class=surprise_class,
        source_mix=_get(src, "generation", obj, "source_mix", float, defaults.source_mix),
        augment=augment,
    )


def _parse_schedule(src, obj) -> ScheduleConfig:
    defaults = ScheduleConfig()
    allowed = {"mixed_epochs", "mixed_synthetic", "mixed_real", "real_only_epochs", "real_only_frames"}
    _check_keys(src, "schedule", obj, allowed)
    return ScheduleConfig(
        mixed_epochs=_get(src, "schedule", obj, "mixed_epochs", int, defaults.mixed_epochs),
        mixed_synthetic=_get(src, "schedule", obj, "mixed_synthetic", int, defaults.mixed_synthetic),
        mixed_real=_get(src, "schedule", obj, "mixed_real", int, defaults.mixed_real),
        real_only_epochs=_get(src, "schedule", obj, "real_only_epochs", int, defaults.real_only_epochs),
        real_only_frames=_get(src, "schedule", obj, "real_only_frames", int, defaults.real_only_frames),
    )


def _parse_frame_transform(src, obj) -> FrameTransformConfig:
    defaults = FrameTransformConfig()
    allowed = {"rotation_max_degrees", "flip_prob", "scale_range", "crop_size"}
    _check_keys(src, "frame_transform", obj, allowed)
    return FrameTransformConfig(
        rotation_max_degrees=_get(src, "frame_transform", obj, "rotation_max_degrees", float, defaults.rotation_max_degrees),
        flip_prob=_get(src, "frame_transform", obj, "flip_prob", float, defaults.flip_prob),
        scale_range=_pair(src, "frame_transform", obj, "scale_range", defaults.scale_range),
        crop_size=_pair(src, "frame_transform", obj, "crop_size", defaults.crop_size, int),
    )


def parse_config(text: str, path="<config>") -> Config:
    src = _Source(text, path)
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise GroupMoodError(f"{path}: invalid TOML: {exc}") from None

    sections = {"schema_version", "catalog", "chroma", "augment", "generation", "schedule", "frame_transform"}
    _check_keys(src, "", data, sections)
    version = data.get("schema_version")
    if version is None:
        raise GroupMoodError(f"{path}: missing required key schema_version")
    if version != SCHEMA_VERSION:
        src.fail("schema_version", f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")

    for name in sections - {"schema_version"}:
        if name in data and not isinstance(data[name], dict):
            src.fail(name, f"[{name}] must be a table")

    augment = _parse_augment(src, data.get("augment", {}))
    cfg = Config(
        layout=_parse_catalog(src, data.get("catalog", {})),
        chroma=_parse_chroma(src, data.get("chroma", {})),
        generation=_parse_generation(src, data.get("generation", {}), augment),
        schedule=_parse_schedule(src, data.get("schedule", {})),
        frame_transform=_parse_frame_transform(src, data.get("frame_transform", {})),
    )
    try:
        cfg.validate()
    except GroupMoodError as exc:
        raise GroupMoodError(f"{path}: {exc}") from None
    return cfg


def load_config(path) -> Config:
    p = Path(path)
    if not p.is_file():
        raise GroupMoodError(f"config file not found: {p}")
    return parse_config(p.read_text(), path=str(p))
