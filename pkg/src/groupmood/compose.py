"""Scene assembly: pick a background and N faces, place them without overlap,
render, and emit labeled records.

Planning and rendering are pure functions of (catalog, config, seed), and the
generator derives one independent seed per scene index, so output is identical
for any worker count and any completion order.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from groupmood import kernels
from groupmood.augment import AugmentRanges, AugmentSpec, apply_augment, augmented_extent, sample_augment_spec
from groupmood.catalog import AssetCatalog
from groupmood.core import Emotion, GroupClass, GroupMoodError, Seed, compute_group_label, derive_seed, map_emotion_to_class

# seed sub-stream indices: asset/emotion selection, augment sampling, placement
_SEL, _AUG, _PLACE = 0, 1, 2


@dataclass(frozen=True)
class GenConfig:
    render_size: tuple = (512, 512)
    min_faces: int = 1
    max_faces: int = 9
    face_count_weights: tuple = ()
    face_height_range: tuple = (0.08, 0.30)
    max_placement_attempts: int = 100
    occupancy_downsample: int = 4
    min_face_px: int = 16
    emotion_weights: dict = field(default_factory=dict)
    exclude_surprise: bool = False
    surprise_class: GroupClass = GroupClass.NEUTRAL
    source_mix: float = 0.5
    augment: AugmentRanges = field(default_factory=AugmentRanges)

    def validate(self) -> None:
        w, h = self.render_size
        if w < 16 or h < 16:
            raise GroupMoodError("render_size must be at least 16x16")
        if not 1 <= self.min_faces <= self.max_faces:
            raise GroupMoodError("need 1 <= min_faces <= max_faces")
        if self.face_count_weights and len(self.face_count_weights) != self.max_faces - self.min_faces + 1:
            raise GroupMoodError("face_count_weights must have one entry per allowed face count")
        lo, hi = self.face_height_range
        if not 0 < lo <= hi <= 1:
            raise GroupMoodError("face_height_range must satisfy 0 < min <= max <= 1")
        if int(round(lo * h)) < 1:
            raise GroupMoodError("render_size too small for the minimum face height")
        if self.max_placement_attempts < 1:
            raise GroupMoodError("max_placement_attempts must be >= 1")
        if self.occupancy_downsample < 1:
            raise GroupMoodError("occupancy_downsample must be >= 1")
        if not 0.0 <= self.source_mix <= 1.0:
            raise GroupMoodError("source_mix must be in [0, 1]")
        if any(v < 0 for v in self.emotion_weights.values()):
            raise GroupMoodError("emotion weights must be >= 0")
        if not self.enabled_emotions():
            raise GroupMoodError("no emotions enabled by config")
        self.augment.validate()

    def enabled_emotions(self) -> list:
        out = []
        for e in Emotion:
            if self.exclude_surprise and e is Emotion.SURPRISE:
                continue
            if self.emotion_weights and self.emotion_weights.get(e, 0.0) <= 0.0:
                continue
            out.append(e)
        return out

    def emotion_probs(self, emotions) -> np.ndarray:
        if not self.emotion_weights:
            return np.full(len(emotions), 1.0 / len(emotions))
        w = np.array([self.emotion_weights[e] for e in emotions], dtype=np.float64)
        return w / w.sum()


@dataclass(frozen=True)
class PlacedFace:
    asset_id: str
    augment: AugmentSpec
    position: tuple  # (x, y) top-left in scene pixels
    size: tuple  # (w, h) rendered pixels
    emotion: Emotion

    def to_json(self) -> dict:
        return {
            "asset_id": self.asset_id,
            "emotion": self.emotion.value,
            "position": list(self.position),
            "size": list(self.size),
            "augment": self.augment.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PlacedFace":
        return cls(
            obj["asset_id"],
            AugmentSpec.from_json(obj["augment"]),
            tuple(obj["position"]),
            tuple(obj["size"]),
            Emotion.parse(obj["emotion"]),
        )


@dataclass(frozen=True)
class SceneSpec:
    scene_id: str
    seed: Seed
    background_id: str
    faces: tuple
    label: GroupClass
    render_size: tuple
    retries: int = 0

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "seed": self.seed.to_json(),
            "background_id": self.background_id,
            "render_size": list(self.render_size),
            "label": int(self.label),
            "label_name": self.label.label_name,
            "faces": [f.to_json() for f in self.faces],
            "retries": self.retries,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SceneSpec":
        return cls(
            obj["scene_id"],
            Seed.from_json(obj["seed"]),
            obj["background_id"],
            tuple(PlacedFace.from_json(f) for f in obj["faces"]),
            GroupClass(obj["label"]),
            tuple(obj["render_size"]),
            obj.get("retries", 0),
        )


class OccupancyMask:
    """Binary grid over the scene at 1/downsample resolution.

    A cell is set iff some placed rectangle touches it, so two rectangles that
    overlap anywhere always collide in the grid: passing the is_free check
    guarantees exact pixel disjointness (the converse over-rejects near-touching
    rectangles, which only costs extra placement attempts).
    """

    def __init__(self, width: int, height: int, downsample: int = 4):
        self.downsample = downsample
        self.grid = np.zeros(
            (math.ceil(height / downsample), math.ceil(width / downsample)), dtype=bool
        )

    def _cells(self, x, y, w, h):
        d = self.downsample
        return slice(y // d, math.ceil((y + h) / d)), slice(x // d, math.ceil((x + w) / d))

    def is_free(self, x, y, w, h) -> bool:
        ys, xs = self._cells(x, y, w, h)
        return not self.grid[ys, xs].any()

    def mark(self, x, y, w, h) -> None:
        ys, xs = self._cells(x, y, w, h)
        self.grid[ys, xs] = True


def rects_disjoint(a, b) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax + aw <= bx or bx + bw <= ax or ay + ah <= by or by + bh <= ay


def scene_label(emotions, surprise_class: GroupClass = GroupClass.NEUTRAL) -> GroupClass:
    """Group label for a list of face emotions (majority class, ties -> NEUTRAL)."""
    counts = Counter(map_emotion_to_class(e, surprise_class) for e in emotions)
    return compute_group_label({c: counts.get(c, 0) for c in GroupClass})


def _select_faces(catalog: AssetCatalog, cfg: GenConfig, sel: np.random.Generator):
    """Draw N, the background and the face assets from the selection stream.

    Runs before anything that depends on render_size, so asset and emotion
    choices are unchanged when only the render size differs.
    """
    emotions = cfg.enabled_emotions()
    probs = cfg.emotion_probs(emotions)
    if cfg.face_count_weights:
        w = np.array(cfg.face_count_weights, dtype=np.float64)
        n = cfg.min_faces + int(sel.choice(len(w), p=w / w.sum()))
    else:
        n = int(sel.integers(cfg.min_faces, cfg.max_faces + 1))
    background_id = catalog.backgrounds[int(sel.integers(len(catalog.backgrounds)))].id

    picks = []
    for _ in range(n):
        emotion = emotions[int(sel.choice(len(emotions), p=probs))]
        mix_draw = float(sel.uniform())
        bucket = catalog.by_emotion.get(emotion, ())
        if not bucket:
            raise GroupMoodError(f"catalog has no faces for emotion {emotion.value!r}")
        full = [i for i in bucket if catalog.face(i).source == "full-head"]
        crop = [i for i in bucket if catalog.face(i).source == "face-crop"]
        if full and crop:
            bucket = full if mix_draw < cfg.source_mix else crop
        asset_id = bucket[int(sel.integers(len(bucket)))]
        picks.append((emotion, asset_id))
    return n, background_id, picks


def _plan_scene(catalog: AssetCatalog, cfg: GenConfig, seed: Seed, scene_id: str):
    cfg.validate()
    width, height = cfg.render_size
    n, background_id, picks = _select_faces(catalog, cfg, seed.child(_SEL).rng())
    specs = []
    for i, (_, asset_id) in enumerate(picks):
        face = catalog.face(asset_id)
        h, w = face.pixels.shape[:2]
        specs.append(sample_augment_spec(cfg.augment, seed.child(_AUG).child(i), face_size=(w, h)))

    attempts_used = 0
    for rnd in range(n - cfg.min_faces + 1):
        m = n - rnd
        rng = seed.child(_PLACE).child(rnd).rng()
        mask = OccupancyMask(width, height, cfg.occupancy_downsample)
        placed = []
        ok = True
        for i in range(m):
            emotion, asset_id = picks[i]
            face = catalog.face(asset_id)
            fh, fw = face.pixels.shape[:2]
            cw, ch = augmented_extent(specs[i], (fw, fh))
            if cw < cfg.min_face_px or ch < cfg.min_face_px:
                raise GroupMoodError(
                    f"degenerate augmentation for {asset_id!r}: extent {cw}x{ch}"
                )
            frac = float(rng.uniform(*cfg.face_height_range))
            th = max(1, int(round(frac * height)))
            tw = max(1, int(round(cw * (th / ch))))
            if tw > width or th > height:
                ok = False
                break
            hit = None
            for _ in range(cfg.max_placement_attempts):
                attempts_used += 1
                x = int(rng.integers(0, width - tw + 1))
                y = int(rng.integers(0, height - th + 1))
                if mask.is_free(x, y, tw, th):
                    hit = (x, y)
                    break
            if hit is None:
                ok = False
                break
            mask.mark(*hit, tw, th)
            placed.append(PlacedFace(asset_id, specs[i], hit, (tw, th), emotion))
        if not ok:
            continue

        rects = [(*f.position, *f.size) for f in placed]
        for a in range(len(rects)):
            for b in range(a + 1, len(rects)):
                if not rects_disjoint(rects[a], rects[b]):
                    raise GroupMoodError("internal error: occupancy mask admitted an overlap")
        label = scene_label([f.emotion for f in placed], cfg.surprise_class)
        spec = SceneSpec(scene_id, seed, background_id, tuple(placed), label, (width, height), rnd)
        return spec, attempts_used
    raise GroupMoodError(
        f"scene overcrowded: could not place even {cfg.min_faces} face(s) in "
        f"{width}x{height} after {cfg.max_placement_attempts} attempts each"
    )


def plan_scene(catalog: AssetCatalog, cfg: GenConfig, seed: Seed, scene_id: str = "scene") -> SceneSpec:
    """Plan one scene: everything but pixels. Deterministic in (catalog, cfg, seed)."""
    spec, _ = _plan_scene(catalog, cfg, seed, scene_id)
    return spec


def prepare_background(pixels: np.ndarray, render_size: tuple) -> np.ndarray:
    """Cover-scale then center-crop a background to the render size."""
    width, height = render_size
    bh, bw = pixels.shape[:2]
    if bw < width or bh < height:
        raise GroupMoodError(f"background {bw}x{bh} smaller than render size {width}x{height}")
    out = pixels.astype(np.float64)
    scale = max(width / bw, height / bh)
    tw = max(width, int(round(bw * scale)))
    th = max(height, int(round(bh * scale)))
    if (tw, th) != (bw, bh):
        out = kernels.resize_bilinear(out, tw, th)
    x0 = (tw - width) // 2
    y0 = (th - height) // 2
    crop = out[y0 : y0 + height, x0 : x0 + width, :]
    return np.rint(crop).astype(np.uint8)


def render_scene(spec: SceneSpec, catalog: AssetCatalog) -> np.ndarray:
    """Render a planned scene to an (H, W, 3) uint8 RGB raster."""
    background = catalog.background(spec.background_id)
    canvas = prepare_background(background.pixels, spec.render_size)
    for face in spec.faces:
        asset = catalog.face(face.asset_id)
        augmented = apply_augment(asset, face.augment)
        planes = np.dstack([augmented.pixels.astype(np.float64), augmented.alpha.astype(np.float64)])
        w, h = face.size
        if planes.shape[:2] != (h, w):
            planes = kernels.resize_bilinear(np.ascontiguousarray(planes), w, h)
        rgb = planes[:, :, :3]
        alpha = np.clip(planes[:, :, 3], 0.0, 1.0)
        kernels.composite_over(canvas, rgb, alpha, *face.position)
    return canvas


def encode_png(rgb: np.ndarray) -> bytes:
    ok, buf = cv2.imencode(".png", cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR), [cv2.IMWRITE_PNG_COMPRESSION, 3])
    if not ok:
        raise GroupMoodError("PNG encoding failed")
    return buf.tobytes()


def decode_png(data: bytes) -> np.ndarray:
    raw = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_COLOR)
    if raw is None:
        raise GroupMoodError("PNG decoding failed")
    return cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)


@dataclass
class GenerationSummary:
    count: int = 0
    class_counts: dict = field(default_factory=lambda: {c: 0 for c in GroupClass})
    scene_retries: int = 0
    placement_attempts: int = 0
    elapsed_seconds: float = 0.0

    @property
    def images_per_second(self) -> float:
        return self.count / self.elapsed_seconds if self.elapsed_seconds > 0 else 0.0

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "class_counts": {c.label_name: self.class_counts[c] for c in GroupClass},
            "scene_retries": self.scene_retries,
            "placement_attempts": self.placement_attempts,
            "elapsed_seconds": self.elapsed_seconds,
            "images_per_second": self.images_per_second,
        }


class DirectorySink:
    """Writes <out>/images/<sceneId>.png plus <out>/manifest.jsonl (index order)."""

    def __init__(self, out_dir):
        self.out = Path(out_dir)
        (self.out / "images").mkdir(parents=True, exist_ok=True)
        self._lines = {}

    def write(self, index: int, spec: SceneSpec, png: bytes) -> None:
        (self.out / "images" / f"{spec.scene_id}.png").write_bytes(png)
        self._lines[index] = json.dumps(spec.to_json(), separators=(",", ":"))

    def close(self) -> None:
        with open(self.out / "manifest.jsonl", "w") as fh:
            for index in sorted(self._lines):
                fh.write(self._lines[index] + "\n")


class StreamSink:
    """Length-prefixed record stream for on-the-fly training consumption.

    Each record is a 4-byte big-endian payload length, then the payload:
    the scene's manifest JSON line (newline-terminated) followed by the PNG
    bytes. Records are emitted in scene-index order regardless of worker
    completion order.
    """

    def __init__(self, fileobj):
        self.fileobj = fileobj
        self._pending = {}
        self._next = 0

    def write(self, index: int, spec: SceneSpec, png: bytes) -> None:
        line = json.dumps(spec.to_json(), separators=(",", ":")).encode() + b"\n"
        self._pending[index] = line + png
        while self._next in self._pending:
            payload = self._pending.pop(self._next)
            self.fileobj.write(len(payload).to_bytes(4, "big"))
            self.fileobj.write(payload)
            self._next += 1
        self.fileobj.flush()

    def close(self) -> None:
        if self._pending:
            raise GroupMoodError("stream sink closed with out-of-order records pending")


def read_stream_records(fileobj):
    """Yield (manifest dict, png bytes) pairs from a StreamSink byte stream."""
    while True:
        header = fileobj.read(4)
        if not header:
            return
        if len(header) < 4:
            raise GroupMoodError("truncated stream record header")
        n = int.from_bytes(header, "big")
        payload = fileobj.read(n)
        if len(payload) < n:
            raise GroupMoodError("truncated stream record payload")
        line, _, png = payload.partition(b"\n")
        yield json.loads(line.decode()), png


def generate_dataset(
    catalog: AssetCatalog,
    cfg: GenConfig,
    root_seed: Seed,
    count: int,
    sink,
    workers: int = 1,
) -> GenerationSummary:
    """Emit `count` (image, SceneSpec) pairs; scene i uses derive_seed(root, i).

    Output bytes are identical for any worker count: every scene is a pure
    function of its derived seed and the sink orders records by index.
    """
    if count < 1:
        raise GroupMoodError("count must be >= 1")
    cfg.validate()
    catalog.validate_for(cfg.enabled_emotions(), cfg.render_size)

    summary = GenerationSummary()
    start = time.perf_counter()

    def build(i: int):
        spec, attempts = _plan_scene(catalog, cfg, derive_seed(root_seed, i), f"scene-{i:08d}")
        return i, spec, encode_png(render_scene(spec, catalog)), attempts

    try:
        if workers <= 1:
            for i in range(count):
                _record(summary, sink, *build(i))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(build, i) for i in range(count)]
                try:
                    for f in as_completed(futures):
                        _record(summary, sink, *f.result())
                except BaseException:
                    for f in futures:
                        f.cancel()
                    raise
    except Exception as exc:
        summary.elapsed_seconds = time.perf_counter() - start
        raise GroupMoodError(
            f"generation aborted after {summary.count}/{count} scenes: {exc}"
        ) from exc

    summary.elapsed_seconds = time.perf_counter() - start
    sink.close()
    return summary


def _record(summary: GenerationSummary, sink, index: int, spec: SceneSpec, png: bytes, attempts: int) -> None:
    sink.write(index, spec, png)
    summary.count += 1
    summary.class_counts[spec.label] += 1
    summary.scene_retries += spec.retries
    summary.placement_attempts += attempts
