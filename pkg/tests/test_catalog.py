import numpy as np
import pytest

from conftest import EMOTION_COLORS, build_catalog_dir, face_image, write_png
from groupmood.catalog import CatalogLayout, load_catalog
from groupmood.core import Emotion, GroupMoodError


def test_subdir_layout_counts(tmp_path):
    for i in range(3):
        write_png(tmp_path / "faces" / "happiness" / f"h{i}.png", face_image((40, 220, 40)))
    for i in range(2):
        write_png(tmp_path / "faces" / "anger" / f"a{i}.png", face_image((220, 40, 40)))
    write_png(tmp_path / "backgrounds" / "b.png", face_image((40, 220, 40), size=128))
    cat = load_catalog(tmp_path)
    assert len(cat.by_emotion[Emotion.HAPPINESS]) == 3
    assert len(cat.by_emotion[Emotion.ANGER]) == 2
    assert len(cat.faces) == 5
    assert len(cat.backgrounds) == 1
    assert cat.backgrounds[0].category == ""


def test_unknown_emotion_token_is_rejected(tmp_path):
    write_png(tmp_path / "faces" / "boredom" / "x.png", face_image((220, 40, 40)))
    with pytest.raises(GroupMoodError, match="unknown emotion token"):
        load_catalog(tmp_path)


def test_load_is_deterministic_including_order(catalog_dir):
    a = load_catalog(catalog_dir)
    b = load_catalog(catalog_dir)
    assert [f.id for f in a.faces] == [f.id for f in b.faces]
    assert a.by_emotion == b.by_emotion
    assert [f.id for f in a.faces] == sorted(f.id for f in a.faces)
    for fa, fb in zip(a.faces, b.faces):
        assert np.array_equal(fa.pixels, fb.pixels)
        assert np.array_equal(fa.alpha, fb.alpha)


def test_filename_token_layout(tmp_path):
    write_png(tmp_path / "faces" / "subj01_hap_f.png", face_image((40, 220, 40)))
    write_png(tmp_path / "faces" / "subj02_ang_f.png", face_image((220, 40, 40)))
    layout = CatalogLayout(
        label_mode="filename_token",
        token_map={"hap": "happiness", "ang": "anger"},
    )
    cat = load_catalog(tmp_path, layout)
    assert len(cat.by_emotion[Emotion.HAPPINESS]) == 1
    assert len(cat.by_emotion[Emotion.ANGER]) == 1

    write_png(tmp_path / "faces" / "subj03_xyz_f.png", face_image((40, 60, 220)))
    with pytest.raises(GroupMoodError, match="unknown emotion token"):
        load_catalog(tmp_path, layout)


def test_source_token_assignment(tmp_path):
    write_png(tmp_path / "faces" / "happiness" / "a_crop.png", face_image((40, 220, 40)))
    write_png(tmp_path / "faces" / "happiness" / "b.png", face_image((40, 220, 40)))
    layout = CatalogLayout(source_token_map={"crop": "face-crop"})
    cat = load_catalog(tmp_path, layout)
    sources = {f.id: f.source for f in cat.faces}
    assert sources["faces/happiness/a_crop.png"] == "face-crop"
    assert sources["faces/happiness/b.png"] == "full-head"


def test_embedded_alpha_is_kept(tmp_path):
    import cv2

    rgba = np.zeros((40, 40, 4), np.uint8)
    rgba[:, :, 2] = 255  # red in BGR order
    rgba[10:30, 10:30, 3] = 255
    path = tmp_path / "faces" / "anger" / "a.png"
    path.parent.mkdir(parents=True)
    assert cv2.imwrite(str(path), rgba)
    cat = load_catalog(tmp_path)
    face = cat.faces[0]
    assert face.alpha.max() == 1.0
    assert face.alpha[0, 0] == 0.0
    assert face.pixels[15, 15, 0] == 255  # back in RGB order


def test_unreadable_file_is_named(tmp_path):
    bad = tmp_path / "faces" / "anger" / "broken.png"
    bad.parent.mkdir(parents=True)
    bad.write_bytes(b"not a png at all")
    with pytest.raises(GroupMoodError, match="broken.png"):
        load_catalog(tmp_path)


def test_required_emotions_are_validated(tmp_path):
    build_catalog_dir(tmp_path, per_emotion=1)
    cat = load_catalog(tmp_path, required_emotions=list(Emotion))
    assert cat.by_emotion[Emotion.FEAR]

    empty = tmp_path / "faces" / "fear"
    for p in empty.iterdir():
        p.unlink()
    with pytest.raises(GroupMoodError, match="fear"):
        load_catalog(tmp_path, required_emotions=list(Emotion))


def test_background_size_validation(tmp_path):
    build_catalog_dir(tmp_path, per_emotion=1, bg_size=100)
    with pytest.raises(GroupMoodError, match="smaller than render size"):
        load_catalog(tmp_path, min_background_size=(512, 512))


def test_colors_fixture_is_far_from_backdrop():
    from groupmood.chroma import color_distance

    gray = np.array((200.0, 200.0, 200.0))
    for color in EMOTION_COLORS.values():
        assert color_distance(np.array(color, np.float64), gray) > 100.0
