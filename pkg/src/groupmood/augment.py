"""Seeded face augmentations and training-time frame transforms.

An AugmentSpec is a recorded list of operations with concrete parameters;
replaying a spec reproduces the output bit-exactly. Ops apply in a fixed
canonical order: flip, rotate, scale, translate, shear, perspective, elastic,
then brightness and contrast. Geometric ops act on pixels and alpha through
one shared warp; photometric ops touch pixels only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from groupmood import kernels
from groupmood.catalog import FaceAsset
from groupmood.core import GroupMoodError, Seed

GEOMETRIC_OPS = ("flip", "rotate", "scale", "translate", "shear", "perspective", "elastic")
PHOTOMETRIC_OPS = ("brightness", "contrast")
OP_ORDER = GEOMETRIC_OPS + PHOTOMETRIC_OPS


@dataclass(frozen=True)
class AugmentOp:
    name: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"op": self.name, **self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "AugmentOp":
        params = {k: v for k, v in obj.items() if k != "op"}
        return cls(obj["op"], params)


@dataclass(frozen=True)
class AugmentSpec:
    ops: tuple = ()

    def __post_init__(self):
        order = [OP_ORDER.index(op.name) for op in self.ops if op.name in OP_ORDER]
        bad = [op.name for op in self.ops if op.name not in OP_ORDER]
        if bad:
            raise GroupMoodError(f"unknown augment ops: {bad}")
        if any(b <= a for a, b in zip(order, order[1:])):
            raise GroupMoodError("augment ops must be unique and in canonical order")

    def to_json(self) -> list:
        return [op.to_json() for op in self.ops]

    @classmethod
    def from_json(cls, obj: list) -> "AugmentSpec":
        return cls(tuple(AugmentOp.from_json(o) for o in obj))


@dataclass(frozen=True)
class AugmentRanges:
    """Per-op inclusion probabilities and parameter bounds.

    Defaults keep distortions mild enough that faces stay recognizable;
    translate and perspective magnitudes are fractions of the face size.
    """

    flip_prob: float = 0.5
    rotate_prob: float = 0.5
    rotate_max_degrees: float = 15.0
    scale_prob: float = 0.5
    scale_range: tuple = (0.8, 1.2)
    translate_prob: float = 0.5
    translate_max_frac: float = 0.10
    shear_prob: float = 0.5
    shear_max: float = 0.1
    perspective_prob: float = 0.5
    perspective_max_frac: float = 0.05
    elastic_prob: float = 0.5
    elastic_alpha_range: tuple = (0.5, 2.0)
    elastic_sigma: float = 8.0
    brightness_prob: float = 0.5
    brightness_max_delta: float = 51.0
    contrast_prob: float = 0.5
    contrast_range: tuple = (0.8, 1.25)

    def validate(self) -> None:
        probs = {
            "flip_prob": self.flip_prob,
            "rotate_prob": self.rotate_prob,
            "scale_prob": self.scale_prob,
            "translate_prob": self.translate_prob,
            "shear_prob": self.shear_prob,
            "perspective_prob": self.perspective_prob,
            "elastic_prob": self.elastic_prob,
            "brightness_prob": self.brightness_prob,
            "contrast_prob": self.contrast_prob,
        }
        for name, p in probs.items():
            if not 0.0 <= p <= 1.0:
                raise GroupMoodError(f"augment {name} must be in [0, 1], got {p}")
        for name, lo, hi in (
            ("scale_range", *self.scale_range),
            ("elastic_alpha_range", *self.elastic_alpha_range),
            ("contrast_range", *self.contrast_range),
        ):
            if lo > hi:
                raise GroupMoodError(f"augment {name} has min > max")
        if self.scale_range[0] <= 0 or self.contrast_range[0] <= 0:
            raise GroupMoodError("scale and contrast ranges must be positive")
        for name, v in (
            ("rotate_max_degrees", self.rotate_max_degrees),
            ("translate_max_frac", self.translate_max_frac),
            ("shear_max", self.shear_max),
            ("perspective_max_frac", self.perspective_max_frac),
            ("elastic_sigma", self.elastic_sigma),
            ("brightness_max_delta", self.brightness_max_delta),
        ):
            if v < 0:
                raise GroupMoodError(f"augment {name} must be >= 0")


IDENTITY3 = np.eye(3)


def _about_center(mat: np.ndarray, w: int, h: int) -> np.ndarray:
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    pre = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    post = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    return post @ mat @ pre


def _homography_from_corners(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        x, y = src[i]
        u, v = dst[i]
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    h = np.linalg.solve(a, b)
    return np.array([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])


def _op_matrix(op: AugmentOp, w: int, h: int) -> np.ndarray:
    p = op.params
    if op.name == "flip":
        return np.array([[-1.0, 0.0, float(w - 1)], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    if op.name == "rotate":
        th = math.radians(p["degrees"])
        rot = np.array(
            [[math.cos(th), -math.sin(th), 0.0], [math.sin(th), math.cos(th), 0.0], [0.0, 0.0, 1.0]]
        )
        return _about_center(rot, w, h)
    if op.name == "scale":
        s = p["factor"]
        return _about_center(np.diag([s, s, 1.0]), w, h)
    if op.name == "translate":
        return np.array([[1.0, 0.0, p["dx"]], [0.0, 1.0, p["dy"]], [0.0, 0.0, 1.0]])
    if op.name == "shear":
        sh = np.array([[1.0, p["kx"], 0.0], [p["ky"], 1.0, 0.0], [0.0, 0.0, 1.0]])
        return _about_center(sh, w, h)
    if op.name == "perspective":
        jit = np.asarray(p["jitter"], dtype=np.float64).reshape(4, 2)
        if not jit.any():
            return IDENTITY3.copy()
        corners = np.array(
            [[0.0, 0.0], [w - 1.0, 0.0], [w - 1.0, h - 1.0], [0.0, h - 1.0]]
        )
        return _homography_from_corners(corners, corners + jit)
    raise GroupMoodError(f"op {op.name!r} has no matrix form")


def _split_ops(spec: AugmentSpec):
    matrix_ops, elastic, photo = [], None, []
    for op in spec.ops:
        if op.name == "elastic":
            elastic = op
        elif op.name in GEOMETRIC_OPS:
            matrix_ops.append(op)
        else:
            photo.append(op)
    return matrix_ops, elastic, photo


def spec_geometry(spec: AugmentSpec, size: tuple):
    """Forward matrix, elastic op and output canvas box for a spec on a (w, h) raster.

    Returns (matrix, elastic, out_w, out_h, ox, oy) where (ox, oy) is the
    offset from the output canvas into the matrix output space.
    """
    w, h = size
    matrix_ops, elastic, _ = _split_ops(spec)
    mat = IDENTITY3
    for op in matrix_ops:
        mat = _op_matrix(op, w, h) @ mat

    corners = np.array(
        [[0.0, 0.0, 1.0], [w - 1.0, 0.0, 1.0], [w - 1.0, h - 1.0, 1.0], [0.0, h - 1.0, 1.0]]
    ).T
    moved = mat @ corners
    moved = moved[:2] / moved[2]
    ox = int(np.floor(moved[0].min()))
    oy = int(np.floor(moved[1].min()))
    out_w = int(np.ceil(moved[0].max())) - ox + 1
    out_h = int(np.ceil(moved[1].max())) - oy + 1

    if elastic is not None and elastic.params["alpha"] > 0:
        pad = int(math.ceil(elastic.params["alpha"]))
        ox -= pad
        oy -= pad
        out_w += 2 * pad
        out_h += 2 * pad
    return mat, elastic, out_w, out_h, ox, oy


def augmented_extent(spec: AugmentSpec, size: tuple) -> tuple:
    """Output canvas (w, h) for a spec applied to a raster of the given (w, h)."""
    _, _, out_w, out_h, _, _ = spec_geometry(spec, size)
    return out_w, out_h


def elastic_displacement(op: AugmentOp, out_h: int, out_w: int) -> np.ndarray | None:
    """Recreate the smoothed random displacement field recorded in an elastic op."""
    alpha = op.params["alpha"]
    if alpha == 0:
        return None
    rng = np.random.default_rng(int(op.params["field_seed"]))
    raw = rng.uniform(-1.0, 1.0, (out_h, out_w, 2))
    sigma = op.params["sigma"]
    smooth = ndimage.gaussian_filter(raw, sigma=(sigma, sigma, 0))
    return smooth * alpha


def warp_geometry(planes: np.ndarray, spec: AugmentSpec) -> np.ndarray:
    """Apply only the geometric part of a spec to (H, W, C) float64 planes."""
    h, w = planes.shape[:2]
    mat, elastic, out_w, out_h, ox, oy = spec_geometry(spec, (w, h))
    disp = elastic_displacement(elastic, out_h, out_w) if elastic is not None else None
    if disp is None and np.array_equal(mat, IDENTITY3):
        return planes.copy()
    inv = np.linalg.inv(mat)
    return kernels.warp_bilinear(planes, inv, out_h, out_w, ox, oy, disp)


def apply_augment(asset: FaceAsset, spec: AugmentSpec, min_face_px: int = 16) -> FaceAsset:
    """Replay a recorded spec on a face asset.

    Pixels and alpha go through the same geometric warp; photometric ops only
    touch pixels. Raises when the transformed extent collapses below
    min_face_px in either dimension.
    """
    h, w = asset.pixels.shape[:2]
    out_w, out_h = augmented_extent(spec, (w, h))
    if out_w < min_face_px or out_h < min_face_px:
        raise GroupMoodError(
            f"degenerate augmentation: output {out_w}x{out_h} is below {min_face_px}px"
        )

    planes = np.dstack([asset.pixels.astype(np.float64), asset.alpha.astype(np.float64)])
    warped = warp_geometry(planes, spec)

    rgb = warped[:, :, :3]
    _, _, photo = _split_ops(spec)
    for op in photo:
        if op.name == "brightness":
            rgb = rgb + op.params["delta"]
        else:
            rgb = (rgb - 127.5) * op.params["factor"] + 127.5

    alpha = np.clip(warped[:, :, 3], 0.0, 1.0).astype(np.float32)
    if not (alpha > 0).any():
        raise GroupMoodError("degenerate augmentation: face became fully transparent")
    pixels = np.rint(np.clip(rgb, 0.0, 255.0)).astype(np.uint8)
    return FaceAsset(asset.id, pixels, alpha, asset.emotion, asset.source)


def sample_augment_spec(
    ranges: AugmentRanges, seed: Seed, face_size: tuple = (100, 100)
) -> AugmentSpec:
    """Draw a concrete AugmentSpec; each op enters independently with its probability.

    face_size scales the translate/perspective magnitudes, which are stored in
    pixels so the recorded spec replays without the ranges.
    """
    ranges.validate()
    rng = seed.rng()
    w, h = face_size
    ops = []
    if rng.uniform() < ranges.flip_prob:
        ops.append(AugmentOp("flip"))
    if rng.uniform() < ranges.rotate_prob:
        deg = rng.uniform(-ranges.rotate_max_degrees, ranges.rotate_max_degrees)
        ops.append(AugmentOp("rotate", {"degrees": float(deg)}))
    if rng.uniform() < ranges.scale_prob:
        ops.append(AugmentOp("scale", {"factor": float(rng.uniform(*ranges.scale_range))}))
    if rng.uniform() < ranges.translate_prob:
        mx = ranges.translate_max_frac * w
        my = ranges.translate_max_frac * h
        ops.append(
            AugmentOp(
                "translate",
                {"dx": float(rng.uniform(-mx, mx)), "dy": float(rng.uniform(-my, my))},
            )
        )
    if rng.uniform() < ranges.shear_prob:
        kx, ky = rng.uniform(-ranges.shear_max, ranges.shear_max, 2)
        ops.append(AugmentOp("shear", {"kx": float(kx), "ky": float(ky)}))
    if rng.uniform() < ranges.perspective_prob:
        m = ranges.perspective_max_frac * min(w, h)
        jitter = rng.uniform(-m, m, 8)
        ops.append(AugmentOp("perspective", {"jitter": [float(v) for v in jitter]}))
    if rng.uniform() < ranges.elastic_prob:
        alpha = float(rng.uniform(*ranges.elastic_alpha_range))
        field_seed = int(rng.integers(2**63))
        ops.append(
            AugmentOp(
                "elastic",
                {"alpha": alpha, "sigma": float(ranges.elastic_sigma), "field_seed": field_seed},
            )
        )
    if rng.uniform() < ranges.brightness_prob:
        delta = rng.uniform(-ranges.brightness_max_delta, ranges.brightness_max_delta)
        ops.append(AugmentOp("brightness", {"delta": float(delta)}))
    if rng.uniform() < ranges.contrast_prob:
        ops.append(AugmentOp("contrast", {"factor": float(rng.uniform(*ranges.contrast_range))}))
    return AugmentSpec(tuple(ops))


@dataclass(frozen=True)
class FrameTransformConfig:
    rotation_max_degrees: float = 10.0
    flip_prob: float = 0.5
    scale_range: tuple = (0.9, 1.1)
    crop_size: tuple = (224, 224)

    def validate(self) -> None:
        if self.rotation_max_degrees < 0:
            raise GroupMoodError("rotation_max_degrees must be >= 0")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise GroupMoodError("flip_prob must be in [0, 1]")
        if self.scale_range[0] > self.scale_range[1] or self.scale_range[0] <= 0:
            raise GroupMoodError("scale_range must be positive with min <= max")
        if min(self.crop_size) < 1:
            raise GroupMoodError("crop_size must be positive")


def apply_frame_transform(
    frame: np.ndarray, seed: Seed, cfg: FrameTransformConfig | None = None
) -> np.ndarray:
    """Training-time frame transform: small rotation, coin-flip mirror, random
    rescale, then a uniformly placed crop (224x224 by default)."""
    cfg = cfg or FrameTransformConfig()
    cfg.validate()
    rng = seed.rng()
    h, w = frame.shape[:2]
    cw, ch = cfg.crop_size

    theta = float(rng.uniform(-cfg.rotation_max_degrees, cfg.rotation_max_degrees))
    do_flip = bool(rng.uniform() < cfg.flip_prob)
    s = float(rng.uniform(*cfg.scale_range))

    out = frame.astype(np.float64)
    if theta != 0.0:
        th = math.radians(theta)
        rot = _about_center(
            np.array(
                [[math.cos(th), -math.sin(th), 0.0], [math.sin(th), math.cos(th), 0.0], [0.0, 0.0, 1.0]]
            ),
            w,
            h,
        )
        out = kernels.warp_bilinear(out, np.linalg.inv(rot), h, w)
    if do_flip:
        out = out[:, ::-1, :]

    sw, sh = int(round(w * s)), int(round(h * s))
    if sw < cw or sh < ch:
        raise GroupMoodError(f"frame of {w}x{h} scaled by {s:.3f} is smaller than the crop size")
    if (sw, sh) != (w, h):
        out = kernels.resize_bilinear(np.ascontiguousarray(out), sw, sh)

    x = int(rng.integers(0, sw - cw + 1))
    y = int(rng.integers(0, sh - ch + 1))
    crop = out[y : y + ch, x : x + cw, :]
    return np.rint(np.clip(crop, 0.0, 255.0)).astype(np.uint8)
