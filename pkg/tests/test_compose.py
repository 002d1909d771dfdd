import io
import json
from math import comb

import numpy as np
import pytest

from conftest import make_face_asset
from groupmood.augment import AugmentRanges, AugmentSpec
from groupmood.catalog import AssetCatalog, BackgroundAsset
from groupmood.compose import (
    DirectorySink,
    GenConfig,
    OccupancyMask,
    PlacedFace,
    SceneSpec,
    StreamSink,
    generate_dataset,
    plan_scene,
    prepare_background,
    read_stream_records,
    rects_disjoint,
    render_scene,
    scene_label,
)
from groupmood.core import Emotion, GroupClass, GroupMoodError, Seed

NO_AUGMENT = AugmentRanges(
    flip_prob=0, rotate_prob=0, scale_prob=0, translate_prob=0, shear_prob=0,
    perspective_prob=0, elastic_prob=0, brightness_prob=0, contrast_prob=0,
)


def small_cfg(**kw):
    base = dict(render_size=(128, 128), augment=NO_AUGMENT)
    base.update(kw)
    return GenConfig(**base)


def test_occupancy_mask_is_conservative():
    mask = OccupancyMask(64, 64, downsample=4)
    assert mask.is_free(10, 10, 20, 20)
    mask.mark(10, 10, 20, 20)
    assert not mask.is_free(29, 29, 5, 5)  # overlapping rectangle collides
    assert mask.is_free(40, 40, 10, 10)


def test_rects_disjoint_helper():
    assert rects_disjoint((0, 0, 10, 10), (10, 0, 5, 5))
    assert not rects_disjoint((0, 0, 10, 10), (9, 9, 5, 5))


def test_scene_label_majority_rule():
    assert scene_label([Emotion.HAPPINESS, Emotion.HAPPINESS, Emotion.ANGER]) is GroupClass.POSITIVE
    assert scene_label([Emotion.ANGER, Emotion.HAPPINESS]) is GroupClass.NEUTRAL
    assert scene_label([Emotion.SURPRISE], GroupClass.POSITIVE) is GroupClass.POSITIVE


def test_single_face_scene_label_matches_face_class(catalog):
    cfg = small_cfg(min_faces=1, max_faces=1)
    for i in range(20):
        spec = plan_scene(catalog, cfg, Seed(3).child(i))
        assert len(spec.faces) == 1
        assert spec.label is scene_label([spec.faces[0].emotion])


def test_planned_scenes_are_in_bounds_and_disjoint(catalog):
    cfg = GenConfig()  # default 512x512, up to 9 faces
    for i in range(200):
        spec = plan_scene(catalog, cfg, Seed(11).child(i))
        w, h = spec.render_size
        rects = [(*f.position, *f.size) for f in spec.faces]
        for x, y, rw, rh in rects:
            assert 0 <= x and 0 <= y and x + rw <= w and y + rh <= h
        for a in range(len(rects)):
            for b in range(a + 1, len(rects)):
                assert rects_disjoint(rects[a], rects[b])


def test_label_is_rederivable_from_faces(catalog):
    cfg = GenConfig(augment=NO_AUGMENT)
    for i in range(100):
        spec = plan_scene(catalog, cfg, Seed(17).child(i))
        assert spec.label is scene_label([f.emotion for f in spec.faces], cfg.surprise_class)


def test_plan_is_deterministic(catalog):
    cfg = GenConfig()
    a = plan_scene(catalog, cfg, Seed(5).child(2), "s")
    b = plan_scene(catalog, cfg, Seed(5).child(2), "s")
    assert a == b


def test_selection_is_independent_of_render_size(catalog):
    small = GenConfig(render_size=(384, 384))
    large = GenConfig(render_size=(512, 512))
    compared = 0
    for i in range(40):
        a = plan_scene(catalog, small, Seed(23).child(i))
        b = plan_scene(catalog, large, Seed(23).child(i))
        assert a.background_id == b.background_id
        if a.retries == 0 and b.retries == 0:
            assert [(f.asset_id, f.emotion) for f in a.faces] == [
                (f.asset_id, f.emotion) for f in b.faces
            ]
            compared += 1
    assert compared > 20


def test_scene_spec_json_round_trip(catalog):
    spec = plan_scene(catalog, GenConfig(), Seed(29).child(1), "scene-x")
    assert SceneSpec.from_json(json.loads(json.dumps(spec.to_json()))) == spec


def test_overcrowded_scene_decrements_then_errors(catalog):
    cfg = small_cfg(
        render_size=(64, 64),
        min_faces=1,
        max_faces=2,
        face_count_weights=(0.0, 1.0),  # force N=2
        face_height_range=(0.9, 0.95),
    )
    spec = plan_scene(catalog, cfg, Seed(31).child(0))
    assert len(spec.faces) == 1
    assert spec.retries == 1

    strict = small_cfg(
        render_size=(64, 64),
        min_faces=2,
        max_faces=2,
        face_height_range=(0.9, 0.95),
    )
    with pytest.raises(GroupMoodError, match="overcrowded"):
        plan_scene(catalog, strict, Seed(31).child(0))


def analytic_label_distribution(p_neg, p_neu, p_pos, n_min=1, n_max=9):
    """Exact label distribution under iid class draws and the majority/tie rule."""
    probs = {c: 0.0 for c in GroupClass}
    n_values = range(n_min, n_max + 1)
    for n in n_values:
        for neg in range(n + 1):
            for neu in range(n - neg + 1):
                pos = n - neg - neu
                pmf = (
                    comb(n, neg) * comb(n - neg, neu)
                    * p_neg**neg * p_neu**neu * p_pos**pos
                )
                counts = {GroupClass.NEGATIVE: neg, GroupClass.NEUTRAL: neu, GroupClass.POSITIVE: pos}
                top = max(counts.values())
                winners = [c for c, v in counts.items() if v == top]
                label = winners[0] if len(winners) == 1 else GroupClass.NEUTRAL
                probs[label] += pmf / len(n_values)
    return probs


def test_label_distribution_matches_analytic_oracle(catalog):
    # default config: 7 emotions uniform, surprise counted as neutral
    expected = analytic_label_distribution(4 / 7, 2 / 7, 1 / 7)
    cfg = GenConfig(augment=NO_AUGMENT)
    n = 10_000
    counts = {c: 0 for c in GroupClass}
    root = Seed(41)
    for i in range(n):
        counts[plan_scene(catalog, cfg, root.child(i)).label] += 1
    for c in GroupClass:
        assert abs(counts[c] / n - expected[c]) < 0.02, (c, counts[c] / n, expected[c])


def mono_catalog(emotion, n_backgrounds=1):
    faces = tuple(
        make_face_asset(emotion, size=48 + 4 * i, asset_id=f"faces/{emotion.value}/{i}.png")
        for i in range(2)
    )
    rng = np.random.default_rng(1)
    bgs = tuple(
        BackgroundAsset(
            f"backgrounds/flat/{i}.png",
            rng.integers(0, 200, (160, 160, 3)).astype(np.uint8),
        )
        for i in range(n_backgrounds)
    )
    by_emotion = {e: tuple(f.id for f in faces if f.emotion is e) for e in Emotion}
    return AssetCatalog(faces=faces, backgrounds=bgs, by_emotion=by_emotion)


def test_forced_single_emotion_yields_one_class():
    cat = mono_catalog(Emotion.SADNESS)
    cfg = small_cfg(emotion_weights={Emotion.SADNESS: 1.0})
    sink = NullSink()
    summary = generate_dataset(cat, cfg, Seed(2), 25, sink)
    assert summary.count == 25
    assert summary.class_counts[GroupClass.NEGATIVE] == 25


class NullSink:
    def __init__(self):
        self.records = {}

    def write(self, index, spec, png):
        self.records[index] = (spec, png)

    def close(self):
        pass


def test_generation_identical_across_worker_counts(catalog):
    cfg = small_cfg()
    one, eight = NullSink(), NullSink()
    s1 = generate_dataset(catalog, cfg, Seed(7), 16, one, workers=1)
    s8 = generate_dataset(catalog, cfg, Seed(7), 16, eight, workers=8)
    assert s1.class_counts == s8.class_counts
    assert one.records.keys() == eight.records.keys()
    for i in one.records:
        assert one.records[i][0] == eight.records[i][0]
        assert one.records[i][1] == eight.records[i][1]  # PNG bytes


def test_directory_sink_layout(tmp_path, catalog):
    out = tmp_path / "ds"
    generate_dataset(catalog, small_cfg(), Seed(9), 5, DirectorySink(out))
    manifest = (out / "manifest.jsonl").read_text().splitlines()
    assert len(manifest) == 5
    for line in manifest:
        rec = json.loads(line)
        assert (out / "images" / f"{rec['scene_id']}.png").is_file()
        assert rec["label_name"] in ("negative", "neutral", "positive")
        assert rec["label"] in (0, 1, 2)
    ids = [json.loads(l)["scene_id"] for l in manifest]
    assert ids == sorted(ids)


def test_stream_sink_round_trips_records(catalog):
    buf = io.BytesIO()
    generate_dataset(catalog, small_cfg(), Seed(13), 6, StreamSink(buf), workers=4)
    ref = NullSink()
    generate_dataset(catalog, small_cfg(), Seed(13), 6, ref)
    buf.seek(0)
    records = list(read_stream_records(buf))
    assert len(records) == 6
    for i, (manifest, png) in enumerate(records):
        spec, ref_png = ref.records[i]
        assert manifest == spec.to_json()
        assert png == ref_png


def test_prepare_background_covers_and_center_crops():
    rng = np.random.default_rng(3)
    bg = rng.integers(0, 256, (300, 200, 3), dtype=np.uint8)
    out = prepare_background(bg, (128, 128))
    assert out.shape == (128, 128, 3)
    with pytest.raises(GroupMoodError, match="smaller than render size"):
        prepare_background(bg, (256, 400))
    exact = prepare_background(bg, (200, 300))
    assert np.array_equal(exact, bg)


def test_render_zero_opacity_face_leaves_background():
    cat = mono_catalog(Emotion.HAPPINESS)
    asset = cat.faces[0]
    ghost_alpha = np.zeros_like(asset.alpha)
    ghost_alpha[0, 0] = 1e-9
    ghost = AssetCatalog(
        faces=(type(asset)(asset.id, asset.pixels, ghost_alpha, asset.emotion, asset.source),),
        backgrounds=cat.backgrounds,
        by_emotion=cat.by_emotion,
    )
    h, w = asset.pixels.shape[:2]
    spec = SceneSpec(
        "s", Seed(1), cat.backgrounds[0].id,
        (PlacedFace(asset.id, AugmentSpec(), (10, 12), (w, h), asset.emotion),),
        GroupClass.POSITIVE, (128, 128),
    )
    out = render_scene(spec, ghost)
    assert np.array_equal(out, prepare_background(cat.backgrounds[0].pixels, (128, 128)))


def test_render_opaque_face_differs_exactly_inside_alpha():
    from groupmood.catalog import FaceAsset

    pixels = np.full((30, 26, 3), 255, dtype=np.uint8)
    asset = FaceAsset("faces/happiness/solid.png", pixels, np.ones((30, 26), np.float32), Emotion.HAPPINESS)
    rng = np.random.default_rng(4)
    bg = BackgroundAsset("backgrounds/b.png", rng.integers(0, 200, (128, 128, 3)).astype(np.uint8))
    cat = AssetCatalog(
        faces=(asset,), backgrounds=(bg,),
        by_emotion={e: ((asset.id,) if e is Emotion.HAPPINESS else ()) for e in Emotion},
    )
    spec = SceneSpec(
        "s", Seed(1), bg.id,
        (PlacedFace(asset.id, AugmentSpec(), (40, 50), (26, 30), Emotion.HAPPINESS),),
        GroupClass.POSITIVE, (128, 128),
    )
    out = render_scene(spec, cat)
    base = prepare_background(bg.pixels, (128, 128))
    diff = (out != base).any(axis=2)
    expected = np.zeros((128, 128), bool)
    expected[50:80, 40:66] = True
    assert np.array_equal(diff, expected)


def test_render_is_deterministic(catalog):
    spec = plan_scene(catalog, GenConfig(), Seed(51).child(3))
    assert np.array_equal(render_scene(spec, catalog), render_scene(spec, catalog))


def test_render_unknown_asset_id_errors(catalog):
    spec = plan_scene(catalog, small_cfg(), Seed(5).child(1))
    broken = SceneSpec(
        spec.scene_id, spec.seed, "backgrounds/none.png", spec.faces, spec.label, spec.render_size
    )
    with pytest.raises(GroupMoodError, match="unknown background"):
        render_scene(broken, catalog)


def test_config_validation_errors():
    with pytest.raises(GroupMoodError, match="min_faces"):
        GenConfig(min_faces=0).validate()
    with pytest.raises(GroupMoodError, match="face_count_weights"):
        GenConfig(face_count_weights=(1.0,)).validate()
    with pytest.raises(GroupMoodError, match="face_height_range"):
        GenConfig(face_height_range=(0.5, 0.2)).validate()
    with pytest.raises(GroupMoodError, match="no emotions"):
        GenConfig(emotion_weights={Emotion.ANGER: 0.0}).validate()


def test_generate_rejects_bad_count(catalog):
    with pytest.raises(GroupMoodError, match="count"):
        generate_dataset(catalog, small_cfg(), Seed(1), 0, NullSink())
