"""Load and validate face/background asset catalogs from a directory tree.

Expected layout under the catalog root:

    faces/...        face photos; emotion from subdirectory name or filename token
    backgrounds/...  scene backdrops; category = subdirectory name (optional)

RGB face photos get their alpha mask from chroma.remove_background; images
with an embedded alpha channel keep it as-is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from groupmood.chroma import ChromaParams, remove_background
from groupmood.core import Emotion, GroupMoodError

IMAGE_EXTS = (".png", ".jpg", ".jpeg")

FACE_SOURCES = ("full-head", "face-crop")


@dataclass(frozen=True)
class CatalogLayout:
    """How emotion labels and face sources are encoded in the directory tree."""

    label_mode: str = "subdir"
    token_map: dict = field(default_factory=dict)
    default_source: str = "full-head"
    source_token_map: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.label_mode not in ("subdir", "filename_token"):
            raise GroupMoodError(
                f"label_mode must be 'subdir' or 'filename_token', got {self.label_mode!r}"
            )
        if self.default_source not in FACE_SOURCES:
            raise GroupMoodError(f"default_source must be one of {FACE_SOURCES}")
        for tok, src in self.source_token_map.items():
            if src not in FACE_SOURCES:
                raise GroupMoodError(f"source for token {tok!r} must be one of {FACE_SOURCES}")

    def emotion_for(self, rel: Path) -> Emotion:
        if self.label_mode == "subdir":
            if len(rel.parts) < 2:
                raise GroupMoodError(f"face file {rel.as_posix()!r} is not inside an emotion subdirectory")
            token = rel.parts[0]
            return Emotion.parse(self.token_map.get(token, token))
        stem = rel.stem
        hits = set()
        for token, name in self.token_map.items():
            if token in stem:
                hits.add(Emotion.parse(name))
        for emotion in Emotion:
            if emotion.value in stem:
                hits.add(emotion)
        if not hits:
            raise GroupMoodError(f"unknown emotion token in face file {rel.as_posix()!r}")
        if len(hits) > 1:
            names = sorted(e.value for e in hits)
            raise GroupMoodError(f"ambiguous emotion tokens {names} in face file {rel.as_posix()!r}")
        return hits.pop()

    def source_for(self, rel: Path) -> str:
        for token, src in self.source_token_map.items():
            if token in rel.stem:
                return src
        return self.default_source


@dataclass(frozen=True)
class FaceAsset:
    id: str
    pixels: np.ndarray  # (H, W, 3) uint8 RGB
    alpha: np.ndarray  # (H, W) float32 in [0, 1]
    emotion: Emotion
    source: str = "full-head"

    def __post_init__(self):
        if self.alpha.shape != self.pixels.shape[:2]:
            raise GroupMoodError(f"face {self.id!r}: alpha shape does not match pixels")
        if not (self.alpha > 0).any():
            raise GroupMoodError(f"face {self.id!r}: alpha mask is fully transparent")
        if self.source not in FACE_SOURCES:
            raise GroupMoodError(f"face {self.id!r}: bad source {self.source!r}")


@dataclass(frozen=True)
class BackgroundAsset:
    id: str
    pixels: np.ndarray  # (H, W, 3) uint8 RGB
    category: str = ""


@dataclass(frozen=True)
class AssetCatalog:
    faces: tuple
    backgrounds: tuple
    by_emotion: dict  # Emotion -> tuple of face ids, catalog order

    def face(self, asset_id: str) -> FaceAsset:
        try:
            return self._face_index[asset_id]
        except KeyError:
            raise GroupMoodError(f"unknown face asset id {asset_id!r}") from None

    def background(self, asset_id: str) -> BackgroundAsset:
        try:
            return self._background_index[asset_id]
        except KeyError:
            raise GroupMoodError(f"unknown background asset id {asset_id!r}") from None

    def __post_init__(self):
        object.__setattr__(self, "_face_index", {f.id: f for f in self.faces})
        object.__setattr__(self, "_background_index", {b.id: b for b in self.backgrounds})

    def validate_for(self, emotions, min_background_size=None) -> None:
        """Check the catalog can serve the given emotions and render size."""
        for emotion in emotions:
            if not self.by_emotion.get(emotion):
                raise GroupMoodError(f"catalog has no faces for required emotion {emotion.value!r}")
        if not self.backgrounds:
            raise GroupMoodError("catalog has no backgrounds")
        if min_background_size is not None:
            mw, mh = min_background_size
            for bg in self.backgrounds:
                h, w = bg.pixels.shape[:2]
                if w < mw or h < mh:
                    raise GroupMoodError(
                        f"background {bg.id!r} is {w}x{h}, smaller than render size {mw}x{mh}"
                    )


def _decode_image(path: Path):
    """Read PNG/JPEG as (rgb uint8, alpha float32 or None)."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise GroupMoodError(f"unreadable image file: {path}")
    if raw.ndim == 2:
        return cv2.cvtColor(raw, cv2.COLOR_GRAY2RGB), None
    if raw.shape[2] == 4:
        rgb = cv2.cvtColor(raw, cv2.COLOR_BGRA2RGB)
        alpha = raw[:, :, 3].astype(np.float32) / 255.0
        return rgb, alpha
    return cv2.cvtColor(raw, cv2.COLOR_BGR2RGB), None


def _image_files(root: Path):
    return sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_EXTS),
        key=lambda p: p.relative_to(root).as_posix(),
    )


def load_catalog(
    root_dir,
    layout: CatalogLayout | None = None,
    chroma: ChromaParams | None = None,
    required_emotions=(),
    min_background_size=None,
) -> AssetCatalog:
    """Build a validated AssetCatalog from root_dir.

    Ordering is lexicographic by asset id (path relative to root_dir), so the
    same directory always loads to the identical catalog.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise GroupMoodError(f"catalog root is not a directory: {root}")
    layout = layout or CatalogLayout()
    layout.validate()

    faces_root = root / "faces"
    backgrounds_root = root / "backgrounds"
    if not faces_root.is_dir():
        raise GroupMoodError(f"catalog is missing a faces/ directory under {root}")

    faces = []
    by_emotion: dict[Emotion, list] = {e: [] for e in Emotion}
    for path in _image_files(faces_root):
        rel = path.relative_to(faces_root)
        emotion = layout.emotion_for(rel)
        pixels, alpha = _decode_image(path)
        if alpha is None:
            try:
                alpha = remove_background(pixels, chroma)
            except GroupMoodError as exc:
                raise GroupMoodError(f"face {path}: {exc}") from None
        asset_id = (Path("faces") / rel).as_posix()
        face = FaceAsset(asset_id, pixels, alpha, emotion, layout.source_for(rel))
        faces.append(face)
        by_emotion[emotion].append(asset_id)

    backgrounds = []
    if backgrounds_root.is_dir():
        for path in _image_files(backgrounds_root):
            rel = path.relative_to(backgrounds_root)
            pixels, _ = _decode_image(path)
            category = rel.parts[0] if len(rel.parts) > 1 else ""
            backgrounds.append(
                BackgroundAsset((Path("backgrounds") / rel).as_posix(), pixels, category)
            )

    catalog = AssetCatalog(
        faces=tuple(faces),
        backgrounds=tuple(backgrounds),
        by_emotion={e: tuple(ids) for e, ids in by_emotion.items()},
    )
    if required_emotions or min_background_size is not None:
        catalog.validate_for(required_emotions, min_background_size)
    return catalog
