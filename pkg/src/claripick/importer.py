"""Best-effort conversion of an externally annotated dataset.

The expected layout is one JSON record per scene with a sibling image:

    ROOT/<scene_id>.json     {"width", "height",
                              "boxes": [[x0,y0,x1,y1] x4],
                              "objects": [{"name", "box": [x0,y0,x1,y1]}, ...],
                              "instructions": [{"sentence", "target", "destination"}, ...]}
    ROOT/<scene_id>.png      (or .jpg)

Instructions referencing unknown objects, with destinations outside 0..3,
or with empty sentences are dropped and counted; objects left without any
valid instruction are dropped too. Scenes that end up empty are skipped.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ImportDataError
from .scenes import BoundingBox, InstructionAnnotation, ObjectInstance, Scene

logger = logging.getLogger(__name__)


@dataclass
class ImportStats:
    scenes_converted: int = 0
    scenes_skipped: int = 0
    instructions_dropped: int = 0
    objects_dropped: int = 0
    reasons: list[str] = field(default_factory=list)

    def note(self, reason: str):
        self.reasons.append(reason)


def _corner_box(raw) -> BoundingBox:
    x0, y0, x1, y1 = (float(v) for v in raw)
    return BoundingBox(x0, y0, x1, y1)


def _convert_record(scene_id: str, raw: dict, image: np.ndarray | None,
                    stats: ImportStats) -> Scene | None:
    width = int(raw["width"])
    height = int(raw["height"])
    boxes = [_corner_box(b) for b in raw["boxes"]]

    objects: dict[str, ObjectInstance] = {}
    for entry in raw.get("objects", []):
        name = str(entry["name"])
        if name in objects:
            stats.note(f"{scene_id}: duplicate object name {name!r} skipped")
            continue
        try:
            bbox = _corner_box(entry["box"])
        except Exception as exc:
            stats.note(f"{scene_id}: object {name!r} has invalid box ({exc})")
            continue
        objects[name] = ObjectInstance(name, bbox, [])

    for ins in raw.get("instructions", []):
        text = str(ins.get("sentence", "")).strip()
        target = ins.get("target")
        destination = ins.get("destination")
        if not text or target not in objects or not isinstance(destination, int) \
                or not 0 <= destination <= 3:
            stats.instructions_dropped += 1
            stats.note(f"{scene_id}: dropped instruction {text[:40]!r} (target {target!r})")
            continue
        objects[target].instructions.append(InstructionAnnotation(text, target, destination))

    kept = [o for o in objects.values() if o.instructions]
    stats.objects_dropped += len(objects) - len(kept)
    if not kept:
        stats.scenes_skipped += 1
        stats.note(f"{scene_id}: no objects with valid instructions")
        return None
    return Scene(scene_id, width, height, boxes, kept, image)


def import_external(annotation_root, stats: ImportStats | None = None) -> list[Scene]:
    """Convert every record under the root; errors on zero conversions."""
    root = Path(annotation_root)
    if not root.is_dir():
        raise ImportDataError(f"{root} is not a readable directory")
    if stats is None:
        stats = ImportStats()

    scenes = []
    for json_path in sorted(root.glob("*.json")):
        scene_id = json_path.stem
        try:
            raw = json.loads(json_path.read_text())
        except json.JSONDecodeError as exc:
            stats.scenes_skipped += 1
            stats.note(f"{scene_id}: unreadable JSON ({exc})")
            continue

        image = None
        for suffix in (".png", ".jpg", ".jpeg"):
            img_path = json_path.with_suffix(suffix)
            if img_path.exists():
                image = np.asarray(Image.open(img_path).convert("RGB"), dtype=np.uint8)
                break

        try:
            scene = _convert_record(scene_id, raw, image, stats)
        except Exception as exc:
            stats.scenes_skipped += 1
            stats.note(f"{scene_id}: conversion failed ({exc})")
            continue
        if scene is not None:
            scenes.append(scene)
            stats.scenes_converted += 1

    if not scenes:
        raise ImportDataError(f"no scenes found under {root}")
    logger.info("imported %d scenes (%d skipped, %d instructions dropped, %d objects dropped)",
                stats.scenes_converted, stats.scenes_skipped,
                stats.instructions_dropped, stats.objects_dropped)
    return scenes
