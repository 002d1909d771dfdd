import cv2
import numpy as np
import pytest

from trainharness.data import run_groupmood

# One saturated color per emotion so synthetic scenes carry a learnable cue.
EMOTION_COLORS = {
    "anger": (220, 40, 40),
    "fear": (120, 40, 160),
    "disgust": (40, 160, 90),
    "sadness": (40, 60, 220),
    "happiness": (40, 220, 40),
    "surprise": (220, 220, 40),
    "neutral": (70, 70, 70),
}

TRAIN_FIXTURE_CONFIG = """
schema_version = 1

[generation]
render_size = [224, 224]
face_height_range = [0.14, 0.20]

[augment]
scale_prob = 0.0
perspective_prob = 0.0
elastic_prob = 0.0
brightness_prob = 0.0
contrast_prob = 0.0
"""


def write_png(path, rgb):
    path.parent.mkdir(parents=True, exist_ok=True)
    assert cv2.imwrite(str(path), cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))


def face_image(color, size=48, block=34, bg=(200, 200, 200)):
    img = np.full((size, size, 3), bg, dtype=np.uint8)
    off = (size - block) // 2
    img[off : off + block, off : off + block] = color
    return img


def build_catalog(root):
    for emotion, color in EMOTION_COLORS.items():
        for i in range(2):
            shade = tuple(min(255, c + 10 * i) for c in color)
            write_png(root / "faces" / emotion / f"{emotion}_{i}.png", face_image(shade))
    rng = np.random.default_rng(5)
    for i in range(2):
        bg = np.zeros((256, 256, 3), np.uint8)
        bg[:, :, 0] = np.linspace(40, 180, 256)[None, :].astype(np.uint8)
        bg[:, :, 1] = np.linspace(60, 160, 256)[:, None].astype(np.uint8)
        bg[:, :, 2] = rng.integers(40 + 40 * i, 90 + 40 * i)
        write_png(root / "backgrounds" / f"bg_{i}.png", bg)
    return root


def make_npz_video(path, n_frames, size=(240, 240)):
    h, w = size
    frames = np.zeros((n_frames, h, w, 3), np.uint8)
    for i in range(n_frames):
        frames[i, :, :, 0] = (23 * i + 11) % 256
        frames[i, :, :, 1] = (57 * i + 3) % 256
        frames[i, :, :, 2] = (i * 5) % 256
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, frames=frames)
    return frames


@pytest.fixture(scope="session")
def catalog_dir(tmp_path_factory):
    return build_catalog(tmp_path_factory.mktemp("catalog"))


@pytest.fixture(scope="session")
def fixture_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "train.toml"
    path.write_text(TRAIN_FIXTURE_CONFIG)
    return path


@pytest.fixture(scope="session")
def dataset64(tmp_path_factory, catalog_dir, fixture_config):
    """64 fixed synthetic scenes rendered through the generator CLI."""
    out = tmp_path_factory.mktemp("data") / "ds64"
    run_groupmood(
        [
            "generate", str(fixture_config), "--catalog", str(catalog_dir),
            "--out", str(out), "--count", "64", "--seed", "123", "--workers", "2",
        ]
    )
    return out


@pytest.fixture(scope="session")
def video_fixture(tmp_path_factory):
    """Two train videos and one val video in npz containers, plus the index CSV."""
    root = tmp_path_factory.mktemp("videos")
    make_npz_video(root / "tr1.npz", 10)
    make_npz_video(root / "tr2.npz", 6)
    make_npz_video(root / "val1.npz", 8)
    index = root / "index.csv"
    index.write_text(
        "video_id,path,frame_count,label,split\n"
        f"tr1,{root/'tr1.npz'},10,positive,train\n"
        f"tr2,{root/'tr2.npz'},6,negative,train\n"
        f"val1,{root/'val1.npz'},8,neutral,val\n"
    )
    return index
