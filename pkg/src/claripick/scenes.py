"""Scene data model, canonical JSON+PNG file format, split and manifest helpers.

A scene file is ``<scene_id>.json`` with a sibling ``<scene_id>.png``.
Scenes whose objects all carry precomputed feature vectors may omit the
image. Schema violations raise SceneParseError with the offending field
path; structural invariant breaches raise SceneValidationError.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, SceneParseError, SceneValidationError

BOX_COUNT = 4


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (0 <= self.x_min < self.x_max and 0 <= self.y_min < self.y_max):
            raise SceneValidationError(
                f"degenerate bounding box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def contains_point(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "y_min": self.y_min, "x_max": self.x_max, "y_max": self.y_max}


@dataclass(frozen=True)
class InstructionAnnotation:
    text: str
    target_object_id: str
    destination_box: int

    def __post_init__(self):
        if not 0 <= self.destination_box < BOX_COUNT:
            raise SceneValidationError(
                f"destination box {self.destination_box} outside 0..{BOX_COUNT - 1} "
                f"(object {self.target_object_id!r})"
            )


@dataclass
class ObjectInstance:
    object_id: str
    bbox: BoundingBox
    instructions: list[InstructionAnnotation] = field(default_factory=list)
    features: np.ndarray | None = None


@dataclass
class Scene:
    scene_id: str
    width: int
    height: int
    boxes: list[BoundingBox]
    objects: list[ObjectInstance]
    image: np.ndarray | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise SceneValidationError(f"scene {self.scene_id!r}: non-positive dimensions")
        if len(self.boxes) != BOX_COUNT:
            raise SceneValidationError(
                f"scene {self.scene_id!r}: expected {BOX_COUNT} destination regions, got {len(self.boxes)}"
            )
        for i in range(BOX_COUNT):
            for j in range(i + 1, BOX_COUNT):
                if _overlap_area(self.boxes[i], self.boxes[j]) > 0:
                    raise SceneValidationError(
                        f"scene {self.scene_id!r}: destination regions {i} and {j} overlap"
                    )
        seen = set()
        for obj in self.objects:
            if obj.object_id in seen:
                raise SceneValidationError(f"scene {self.scene_id!r}: duplicate object_id {obj.object_id!r}")
            seen.add(obj.object_id)
            b = obj.bbox
            if b.x_max > self.width or b.y_max > self.height:
                raise SceneValidationError(
                    f"object {obj.object_id!r}: bounding box exceeds image bounds "
                    f"{self.width}x{self.height}"
                )
        if self.image is not None and self.image.shape[:2] != (self.height, self.width):
            raise SceneValidationError(
                f"scene {self.scene_id!r}: image shape {self.image.shape} does not match "
                f"declared {self.width}x{self.height}"
            )

    @property
    def object_ids(self) -> list[str]:
        return [o.object_id for o in self.objects]

    def object_by_id(self, object_id: str) -> ObjectInstance:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        raise KeyError(object_id)

    def all_instructions(self) -> list[InstructionAnnotation]:
        out = []
        for obj in self.objects:
            out.extend(obj.instructions)
        return out

    def copy(self) -> "Scene":
        return Scene(
            scene_id=self.scene_id,
            width=self.width,
            height=self.height,
            boxes=list(self.boxes),
            objects=[
                ObjectInstance(o.object_id, o.bbox, list(o.instructions),
                               None if o.features is None else o.features.copy())
                for o in self.objects
            ],
            image=None if self.image is None else self.image.copy(),
        )


def _overlap_area(a: BoundingBox, b: BoundingBox) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    return max(0.0, w) * max(0.0, h)


def crop_region(image: np.ndarray, bbox: BoundingBox) -> np.ndarray:
    """The RGB pixel block covered by a bounding box."""
    x0 = int(math.floor(bbox.x_min))
    y0 = int(math.floor(bbox.y_min))
    x1 = max(x0 + 1, int(math.ceil(bbox.x_max)))
    y1 = max(y0 + 1, int(math.ceil(bbox.y_max)))
    return image[y0:y1, x0:x1]


def object_crop(scene: Scene, obj: ObjectInstance) -> np.ndarray:
    """Materialize the RGB crop of an object from the scene image."""
    if scene.image is None:
        raise SceneValidationError(f"scene {scene.scene_id!r} carries no image to crop from")
    return crop_region(scene.image, obj.bbox)


# ---------------------------------------------------------------------------
# canonical file format


def _require(mapping, key, path):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SceneParseError(f"missing field {key!r}", path)
    return mapping[key]


def _parse_bbox(raw, path) -> BoundingBox:
    vals = {}
    for key in ("x_min", "y_min", "x_max", "y_max"):
        v = _require(raw, key, path)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SceneParseError(f"field {key!r} must be a number", path)
        vals[key] = float(v)
    return BoundingBox(**vals)


def scene_to_dict(scene: Scene) -> dict:
    objects = []
    for obj in scene.objects:
        entry = {
            "object_id": obj.object_id,
            "bbox": obj.bbox.to_dict(),
            "instructions": [
                {"text": ins.text, "destination_box": ins.destination_box}
                for ins in obj.instructions
            ],
        }
        if obj.features is not None:
            entry["features"] = [float(v) for v in obj.features]
        objects.append(entry)
    return {
        "scene_id": scene.scene_id,
        "width": scene.width,
        "height": scene.height,
        "boxes": [b.to_dict() for b in scene.boxes],
        "objects": objects,
    }


def scene_from_dict(raw: dict) -> Scene:
    scene_id = _require(raw, "scene_id", "scene_id")
    if not isinstance(scene_id, str):
        raise SceneParseError("scene_id must be a string", "scene_id")
    width = _require(raw, "width", "width")
    height = _require(raw, "height", "height")
    if not isinstance(width, int) or not isinstance(height, int):
        raise SceneParseError("width/height must be integers", "width")
    boxes_raw = _require(raw, "boxes", "boxes")
    if not isinstance(boxes_raw, list):
        raise SceneParseError("boxes must be a list", "boxes")
    boxes = [_parse_bbox(b, f"boxes[{i}]") for i, b in enumerate(boxes_raw)]
    objects_raw = _require(raw, "objects", "objects")
    if not isinstance(objects_raw, list):
        raise SceneParseError("objects must be a list", "objects")
    objects = []
    for i, o in enumerate(objects_raw):
        opath = f"objects[{i}]"
        object_id = _require(o, "object_id", opath)
        if not isinstance(object_id, str):
            raise SceneParseError("object_id must be a string", f"{opath}.object_id")
        bbox = _parse_bbox(_require(o, "bbox", f"{opath}.bbox"), f"{opath}.bbox")
        instructions = []
        for j, ins in enumerate(_require(o, "instructions", f"{opath}.instructions")):
            ipath = f"{opath}.instructions[{j}]"
            text = _require(ins, "text", ipath)
            dest = _require(ins, "destination_box", ipath)
            if not isinstance(text, str):
                raise SceneParseError("text must be a string", f"{ipath}.text")
            if not isinstance(dest, int) or isinstance(dest, bool):
                raise SceneParseError("destination_box must be an integer", f"{ipath}.destination_box")
            instructions.append(InstructionAnnotation(text, object_id, dest))
        features = None
        if "features" in o:
            features = np.asarray(o["features"], dtype=np.float64)
            if features.ndim != 1:
                raise SceneParseError("features must be a flat float array", f"{opath}.features")
        objects.append(ObjectInstance(object_id, bbox, instructions, features))
    return Scene(scene_id=scene_id, width=width, height=height, boxes=boxes, objects=objects)


def save_scene(scene: Scene, path) -> Path:
    """Write ``<scene_id>.json`` (+ ``<scene_id>.png`` when an image exists)."""
    path = Path(path)
    if path.suffix == ".json":
        json_path = path
    else:
        path.mkdir(parents=True, exist_ok=True)
        json_path = path / f"{scene.scene_id}.json"
    json_path.write_text(json.dumps(scene_to_dict(scene), indent=1, sort_keys=False))
    if scene.image is not None:
        Image.fromarray(scene.image, mode="RGB").save(json_path.with_suffix(".png"))
    return json_path


def load_scene(path) -> Scene:
    json_path = Path(path)
    try:
        raw = json.loads(json_path.read_text())
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise SceneParseError(f"not valid JSON: {exc}", str(json_path)) from exc
    scene = scene_from_dict(raw)
    png_path = json_path.with_suffix(".png")
    if png_path.exists():
        image = np.asarray(Image.open(png_path).convert("RGB"), dtype=np.uint8)
        scene = Scene(scene.scene_id, scene.width, scene.height, scene.boxes, scene.objects, image)
    elif any(o.features is None for o in scene.objects):
        raise SceneValidationError(
            f"scene {scene.scene_id!r}: no image file and not all objects carry features"
        )
    return scene


# ---------------------------------------------------------------------------
# splits and manifests


def split_dataset(scenes, validation_fraction: float, seed: int):
    """Deterministic scene-level split into (train, validation)."""
    if not 0 < validation_fraction < 1:
        raise ConfigError(f"validation fraction {validation_fraction} outside (0, 1)")
    if len(scenes) < 2:
        raise ConfigError("need at least 2 scenes to split")
    n_val = max(1, int(len(scenes) * validation_fraction))
    n_val = min(n_val, len(scenes) - 1)
    order = np.random.default_rng(seed).permutation(len(scenes))
    val_idx = set(int(i) for i in order[:n_val])
    train = [s for i, s in enumerate(scenes) if i not in val_idx]
    validation = [s for i, s in enumerate(scenes) if i in val_idx]
    return train, validation


def write_manifest(path, entries) -> None:
    """Write newline-delimited ``scene_id<TAB>split`` rows."""
    lines = [f"{scene_id}\t{tag}" for scene_id, tag in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> list[tuple[str, str]]:
    entries = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        scene_id, _, tag = line.partition("\t")
        if not tag:
            raise SceneParseError(f"manifest line without split tag: {line!r}", str(path))
        entries.append((scene_id, tag))
    return entries


def load_dataset(root) -> dict[str, list[Scene]]:
    """Load scenes grouped by split tag from a directory with a manifest."""
    root = Path(root)
    manifest = root / "manifest.txt"
    groups: dict[str, list[Scene]] = {}
    if manifest.exists():
        for scene_id, tag in read_manifest(manifest):
            groups.setdefault(tag, []).append(load_scene(root / f"{scene_id}.json"))
    else:
        files = sorted(root.glob("*.json"))
        files = [f for f in files if not f.name.endswith(".labels.json")]
        if not files:
            raise SceneParseError("no scenes found", str(root))
        groups["train"] = [load_scene(f) for f in files]
    return groups
