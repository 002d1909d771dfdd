import cv2
import numpy as np
import pytest

from groupmood.catalog import FaceAsset, load_catalog
from groupmood.core import Emotion

# One distinct saturated color per emotion, all far from the studio gray.
EMOTION_COLORS = {
    Emotion.ANGER: (220, 40, 40),
    Emotion.FEAR: (120, 40, 160),
    Emotion.DISGUST: (40, 160, 90),
    Emotion.SADNESS: (40, 60, 220),
    Emotion.HAPPINESS: (40, 220, 40),
    Emotion.SURPRISE: (220, 220, 40),
    Emotion.NEUTRAL: (70, 70, 70),
}

STUDIO_GRAY = (200, 200, 200)


def write_png(path, rgb):
    path.parent.mkdir(parents=True, exist_ok=True)
    ok = cv2.imwrite(str(path), cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
    assert ok, f"failed to write {path}"


def face_image(color, size=48, block=32, bg=STUDIO_GRAY):
    """Studio-style photo: uniform backdrop with a centered colored block."""
    img = np.full((size, size, 3), bg, dtype=np.uint8)
    off = (size - block) // 2
    img[off : off + block, off : off + block] = color
    return img


def gradient_image(w, h, tint=(1.0, 1.0, 1.0)):
    xs = np.linspace(30, 225, w)
    ys = np.linspace(60, 180, h)
    img = np.zeros((h, w, 3), np.float64)
    img[:, :, 0] = xs[None, :] * tint[0]
    img[:, :, 1] = ys[:, None] * tint[1]
    img[:, :, 2] = (xs[None, :] + ys[:, None]) / 2.0 * tint[2]
    return np.clip(img, 0, 255).astype(np.uint8)


def make_face_asset(emotion=Emotion.HAPPINESS, size=48, block=32, asset_id=None):
    """In-memory face asset with a binary centered-square alpha."""
    img = face_image(EMOTION_COLORS[emotion], size=size, block=block)
    alpha = np.zeros((size, size), np.float32)
    off = (size - block) // 2
    alpha[off : off + block, off : off + block] = 1.0
    return FaceAsset(asset_id or f"faces/{emotion.value}/mem.png", img, alpha, emotion)


def build_catalog_dir(root, per_emotion=2, bg_size=600, n_backgrounds=2):
    """Write a subdir-layout catalog with assets for all seven emotions."""
    for emotion, color in EMOTION_COLORS.items():
        for i in range(per_emotion):
            shade = tuple(min(255, c + 12 * i) for c in color)
            write_png(
                root / "faces" / emotion.value / f"{emotion.value}_{i}.png",
                face_image(shade, size=48 + 4 * i, block=32 + 4 * i),
            )
    tints = [(1.0, 1.0, 1.0), (0.9, 1.0, 1.1), (1.1, 0.8, 1.0)]
    for i in range(n_backgrounds):
        write_png(
            root / "backgrounds" / "indoor" / f"bg_{i}.png",
            gradient_image(bg_size, bg_size, tints[i % len(tints)]),
        )
    return root


def make_npz_video(path, n_frames, size=(24, 32)):
    """Synthetic 'video' container: frame i is a flat image encoding i."""
    h, w = size
    frames = np.zeros((n_frames, h, w, 3), np.uint8)
    for i in range(n_frames):
        frames[i, :, :, 0] = (17 * i + 3) % 256
        frames[i, :, :, 1] = (31 * i + 7) % 256
        frames[i, :, :, 2] = i % 256
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, frames=frames)
    return frames


def write_video_index(path, rows):
    lines = ["video_id,path,frame_count,label,split"]
    lines += [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="session")
def catalog_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("catalog")
    return build_catalog_dir(root)


@pytest.fixture(scope="session")
def catalog(catalog_dir):
    return load_catalog(catalog_dir)
