"""Synthetic scene/instruction generator contracts.

The generator must be deterministic, its referent bookkeeping must agree
with exhaustive attribute matching, and rendered scenes must round-trip
through the canonical file format.
"""

import numpy as np
import pytest

from claripick.errors import ConfigError
from claripick.scenes import BoundingBox, ObjectInstance, Scene, load_scene, save_scene, scene_to_dict
from claripick.synthetic import (
    COLORS,
    GeneratorConfig,
    Mention,
    SceneLabels,
    generate_synthetic_dataset,
    grid_boxes,
    load_labels,
    mention_referents,
    nearest_neighbor_id,
    save_labels,
)


def small_config(**overrides):
    base = dict(scene_count=6, min_objects=3, max_objects=5, ambiguity_rate=0.0, image_size=256)
    base.update(overrides)
    return GeneratorConfig(**base)


# -- config -------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(scene_count=0).validate()
    with pytest.raises(ConfigError):
        small_config(min_objects=5, max_objects=3).validate()
    with pytest.raises(ConfigError):
        small_config(ambiguity_rate=1.5).validate()
    with pytest.raises(ConfigError):
        small_config(min_objects=1, ambiguity_rate=0.5).validate()
    with pytest.raises(ConfigError):
        small_config(image_size=32).validate()
    small_config().validate()


def test_grid_boxes_layout():
    boxes = grid_boxes(320)
    assert len(boxes) == 4
    assert boxes[0].x_min < boxes[1].x_min and boxes[0].y_min == boxes[1].y_min
    assert boxes[2].y_min > boxes[0].y_min and boxes[2].x_min == boxes[0].x_min
    for b in boxes:
        assert 0 < b.x_min and b.x_max < 320 and b.y_max < 320


# -- determinism --------------------------------------------------------------


def test_same_seed_identical_datasets():
    cfg = small_config(ambiguity_rate=0.4)
    a = generate_synthetic_dataset(cfg, seed=11)
    b = generate_synthetic_dataset(cfg, seed=11)
    assert len(a.scenes) == len(b.scenes) == cfg.scene_count
    for sa, sb in zip(a.scenes, b.scenes):
        assert scene_to_dict(sa) == scene_to_dict(sb)
        assert np.array_equal(sa.image, sb.image)
    for sid in a.labels:
        assert a.labels[sid].to_dict() == b.labels[sid].to_dict()


def test_different_seeds_differ():
    cfg = small_config()
    a = generate_synthetic_dataset(cfg, seed=1)
    b = generate_synthetic_dataset(cfg, seed=2)
    assert any(scene_to_dict(x) != scene_to_dict(y) for x, y in zip(a.scenes, b.scenes))


# -- referent bookkeeping -----------------------------------------------------


def test_rate_zero_every_referent_set_singleton():
    data = generate_synthetic_dataset(small_config(scene_count=8), seed=3)
    checked = 0
    for scene in data.scenes:
        labels = data.labels[scene.scene_id]
        for oid, entries in labels.entries.items():
            for entry in entries:
                assert entry.referents == [oid]
                assert not entry.ambiguous
                checked += 1
    assert checked >= 8 * 3 * 3


def test_rate_one_flagged_instructions_have_multiple_referents():
    cfg = small_config(scene_count=8, min_objects=4, max_objects=6, ambiguity_rate=1.0)
    data = generate_synthetic_dataset(cfg, seed=5)
    flagged = 0
    for scene in data.scenes:
        labels = data.labels[scene.scene_id]
        for entries in labels.entries.values():
            for entry in entries:
                if entry.ambiguous:
                    flagged += 1
                    assert len(entry.referents) >= 2
    assert flagged > 0


def test_target_always_in_referent_set():
    for seed, rate in [(7, 0.0), (8, 0.5), (9, 1.0)]:
        cfg = small_config(scene_count=5, min_objects=4, max_objects=6, ambiguity_rate=rate)
        data = generate_synthetic_dataset(cfg, seed=seed)
        for scene in data.scenes:
            labels = data.labels[scene.scene_id]
            for oid, entries in labels.entries.items():
                for entry in entries:
                    assert oid in entry.referents


def test_ambiguous_flag_matches_referent_count():
    cfg = small_config(scene_count=10, min_objects=4, max_objects=6, ambiguity_rate=0.5)
    data = generate_synthetic_dataset(cfg, seed=13)
    for scene in data.scenes:
        for entries in data.labels[scene.scene_id].entries.values():
            for entry in entries:
                assert entry.ambiguous == (len(entry.referents) >= 2)


def test_position_instructions_never_ambiguous():
    cfg = small_config(scene_count=10, min_objects=4, max_objects=6, ambiguity_rate=1.0)
    data = generate_synthetic_dataset(cfg, seed=17)
    saw_position = False
    for scene in data.scenes:
        for entries in data.labels[scene.scene_id].entries.values():
            for entry in entries:
                if entry.kind == "position":
                    saw_position = True
                    assert not entry.ambiguous
                    assert len(entry.referents) == 1
    assert saw_position


def test_each_object_gets_three_plus_instructions_and_kinds():
    data = generate_synthetic_dataset(small_config(scene_count=6), seed=19)
    kinds = set()
    for scene in data.scenes:
        labels = data.labels[scene.scene_id]
        for obj in scene.objects:
            entries = labels.entries[obj.object_id]
            assert len(obj.instructions) >= 3
            assert len(entries) == len(obj.instructions)
            kinds.update(e.kind for e in entries)
            for ins in obj.instructions:
                assert ins.target_object_id == obj.object_id
                assert 0 <= ins.destination_box <= 3
                assert ins.text.strip()
    assert {"attribute", "position", "ordinal", "relational"} <= kinds


# -- the exhaustive mention oracle --------------------------------------------


def hand_scene():
    boxes = grid_boxes(224)
    objs = [
        ObjectInstance("a", BoundingBox(20, 20, 50, 50)),    # box 0, leftmost
        ObjectInstance("b", BoundingBox(130, 24, 160, 54)),  # box 1
        ObjectInstance("c", BoundingBox(20, 120, 50, 150)),  # box 2, right below a
    ]
    scene = Scene("hand", 224, 224, boxes, objs)
    attributes = {
        "a": {"color": "red", "shape": "circle", "size": "small", "pattern": "solid"},
        "b": {"color": "red", "shape": "circle", "size": "large", "pattern": "solid"},
        "c": {"color": "blue", "shape": "square", "size": "small", "pattern": "striped"},
    }
    return scene, attributes


def test_mention_referents_attribute_matching():
    scene, attrs = hand_scene()
    both = mention_referents(scene, attrs, Mention({"color": "red", "shape": "circle"}))
    assert both == ["a", "b"]
    one = mention_referents(scene, attrs, Mention({"color": "red", "size": "large"}))
    assert one == ["b"]
    none = mention_referents(scene, attrs, Mention({"color": "green"}))
    assert none == []


def test_mention_referents_box_and_ordinal():
    scene, attrs = hand_scene()
    in_box1 = mention_referents(scene, attrs, Mention({"color": "red"}, box=1))
    assert in_box1 == ["b"]
    second = mention_referents(scene, attrs, Mention({"color": "red"}, ordinal=2))
    assert second == ["b"]
    beyond = mention_referents(scene, attrs, Mention({"color": "red"}, ordinal=3))
    assert beyond == []


def test_mention_referents_relational():
    scene, attrs = hand_scene()
    near_blue = mention_referents(scene, attrs, Mention({"color": "red"}, next_to={"color": "blue"}))
    assert near_blue == ["a"]


def test_nearest_neighbor():
    scene, _ = hand_scene()
    assert nearest_neighbor_id(scene, "b") == "a"
    lone = Scene("one", 224, 224, grid_boxes(224), [ObjectInstance("x", BoundingBox(20, 20, 40, 40))])
    assert nearest_neighbor_id(lone, "x") is None


def test_generated_referents_match_fresh_oracle_run():
    cfg = small_config(scene_count=5, min_objects=4, max_objects=6, ambiguity_rate=0.6)
    data = generate_synthetic_dataset(cfg, seed=23)
    for scene in data.scenes:
        labels = data.labels[scene.scene_id]
        for entries in labels.entries.values():
            for entry in entries:
                again = mention_referents(scene, labels.attributes, entry.mention)
                assert again == entry.referents


# -- rendering ----------------------------------------------------------------


def test_rendered_objects_show_their_color():
    data = generate_synthetic_dataset(small_config(scene_count=3), seed=29)
    for scene in data.scenes:
        labels = data.labels[scene.scene_id]
        for obj in scene.objects:
            color = np.asarray(COLORS[labels.attributes[obj.object_id]["color"]], dtype=np.int16)
            b = obj.bbox
            crop = scene.image[int(b.y_min):int(b.y_max), int(b.x_min):int(b.x_max)].astype(np.int16)
            # per-object hue jitter is at most +-8 per channel
            hits = np.all(np.abs(crop - color) <= 8, axis=-1)
            assert hits.any(), f"{obj.object_id} missing its color in crop"


def test_objects_sit_inside_their_destination_grid():
    data = generate_synthetic_dataset(small_config(scene_count=4), seed=31)
    for scene in data.scenes:
        for obj in scene.objects:
            cx, cy = obj.bbox.center
            assert any(b.contains_point(cx, cy) for b in scene.boxes)


# -- persistence --------------------------------------------------------------


def test_labels_sidecar_round_trip(tmp_path):
    data = generate_synthetic_dataset(small_config(scene_count=2, ambiguity_rate=0.5), seed=37)
    scene = data.scenes[0]
    labels = data.labels[scene.scene_id]
    path = save_labels(labels, tmp_path, scene.scene_id)
    assert path.name == f"{scene.scene_id}.labels.json"
    again = load_labels(tmp_path, scene.scene_id)
    assert isinstance(again, SceneLabels)
    assert again.to_dict() == labels.to_dict()


def test_hundred_generated_scenes_round_trip(tmp_path):
    cfg = GeneratorConfig(scene_count=100, min_objects=2, max_objects=4, ambiguity_rate=0.3, image_size=192)
    data = generate_synthetic_dataset(cfg, seed=41)
    assert len(data.scenes) == 100
    for scene in data.scenes:
        path = save_scene(scene, tmp_path)
        loaded = load_scene(path)
        assert scene_to_dict(loaded) == scene_to_dict(scene)
        assert np.array_equal(loaded.image, scene.image)
