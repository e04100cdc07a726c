"""External dataset conversion: layout mapping, validation drops, counters."""

import json

import numpy as np
import pytest
from PIL import Image

from claripick.errors import ImportDataError
from claripick.importer import ImportStats, import_external


def write_record(root, scene_id, record, image_size=None):
    (root / f"{scene_id}.json").write_text(json.dumps(record))
    if image_size is not None:
        arr = np.full((image_size, image_size, 3), 200, dtype=np.uint8)
        Image.fromarray(arr).save(root / f"{scene_id}.png")


def sample_record():
    return {
        "width": 200,
        "height": 200,
        "boxes": [[0, 0, 100, 100], [100, 0, 200, 100],
                  [0, 100, 100, 200], [100, 100, 200, 200]],
        "objects": [
            {"name": "obj-1", "box": [10, 12, 40, 44]},
            {"name": "obj-2", "box": [120, 20, 150, 60]},
        ],
        "instructions": [
            {"sentence": "move the tissue box", "target": "obj-1", "destination": 2},
            {"sentence": "take the brown snack", "target": "obj-2", "destination": 0},
        ],
    }


def test_empty_directory_rejected(tmp_path):
    with pytest.raises(ImportDataError, match="no scenes found"):
        import_external(tmp_path)


def test_missing_root_rejected(tmp_path):
    with pytest.raises(ImportDataError, match="not a readable directory"):
        import_external(tmp_path / "absent")


def test_single_scene_fixture_converts(tmp_path):
    write_record(tmp_path, "scene-7", sample_record(), image_size=200)
    scenes = import_external(tmp_path)
    assert len(scenes) == 1
    scene = scenes[0]
    assert scene.scene_id == "scene-7"
    assert (scene.width, scene.height) == (200, 200)
    assert scene.image.shape == (200, 200, 3)

    first = scene.object_by_id("obj-1")
    assert (first.bbox.x_min, first.bbox.y_min, first.bbox.x_max, first.bbox.y_max) \
        == (10, 12, 40, 44)
    assert first.instructions[0].text == "move the tissue box"
    assert first.instructions[0].destination_box == 2
    second = scene.object_by_id("obj-2")
    assert second.instructions[0].target_object_id == "obj-2"


def test_scene_without_image_still_loads(tmp_path):
    write_record(tmp_path, "s", sample_record())
    scenes = import_external(tmp_path)
    assert scenes[0].image is None


def test_invalid_instructions_dropped_and_counted(tmp_path):
    record = sample_record()
    record["instructions"] += [
        {"sentence": "grab the ghost", "target": "obj-9", "destination": 1},
        {"sentence": "", "target": "obj-1", "destination": 1},
        {"sentence": "put it away", "target": "obj-1", "destination": 7},
        {"sentence": "drop it", "target": "obj-1", "destination": "left"},
    ]
    write_record(tmp_path, "s", record)
    stats = ImportStats()
    scenes = import_external(tmp_path, stats)
    assert stats.instructions_dropped == 4
    assert sum(len(o.instructions) for o in scenes[0].objects) == 2
    assert any("obj-9" in reason for reason in stats.reasons)


def test_objects_without_instructions_dropped(tmp_path):
    record = sample_record()
    record["objects"].append({"name": "lonely", "box": [60, 60, 80, 80]})
    write_record(tmp_path, "s", record)
    stats = ImportStats()
    scenes = import_external(tmp_path, stats)
    assert stats.objects_dropped == 1
    assert scenes[0].object_ids == ["obj-1", "obj-2"]


def test_scene_with_no_valid_instructions_skipped(tmp_path):
    bad = sample_record()
    bad["instructions"] = [
        {"sentence": "grab it", "target": "nope", "destination": 1}]
    write_record(tmp_path, "bad", bad)
    write_record(tmp_path, "good", sample_record())
    stats = ImportStats()
    scenes = import_external(tmp_path, stats)
    assert [s.scene_id for s in scenes] == ["good"]
    assert stats.scenes_skipped == 1
    assert stats.scenes_converted == 1


def test_unreadable_json_skipped_not_fatal(tmp_path):
    (tmp_path / "broken.json").write_text("{not json")
    write_record(tmp_path, "fine", sample_record())
    stats = ImportStats()
    scenes = import_external(tmp_path, stats)
    assert [s.scene_id for s in scenes] == ["fine"]
    assert any("unreadable JSON" in r for r in stats.reasons)


def test_duplicate_object_names_keep_first(tmp_path):
    record = sample_record()
    record["objects"].append({"name": "obj-1", "box": [60, 60, 90, 90]})
    write_record(tmp_path, "s", record)
    scenes = import_external(tmp_path)
    kept = scenes[0].object_by_id("obj-1")
    assert kept.bbox.x_max == 40


def test_imported_scenes_sorted_by_id(tmp_path):
    for sid in ("b-scene", "a-scene", "c-scene"):
        write_record(tmp_path, sid, sample_record())
    scenes = import_external(tmp_path)
    assert [s.scene_id for s in scenes] == ["a-scene", "b-scene", "c-scene"]
