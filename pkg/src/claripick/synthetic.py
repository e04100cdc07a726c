"""Synthetic scene and instruction generator for desk-scale training.

Scenes are a 2x2 grid of destination boxes holding colored shapes with
four attribute axes (color, shape, size, pattern). Every object receives
template instructions of four kinds: attribute-only, absolute-position,
relational ("next to"), and ordinal ("second from the left"). Each
instruction's semantics are captured as a Mention, and its exact referent
set is computed by exhaustively matching the mention against all scene
objects, which yields ground-truth ambiguity labels.

Ambiguity is manufactured structurally: when the ambiguity rate is
positive, a rate-dependent share of objects get a partner that shares
(color, shape) but differs in both size and pattern, and sits in a
different box; the remaining objects keep a unique color+shape
combination. A flagged instruction mentions only the shared attribute
subset, so at least two objects match it, and the per-instruction flag
probability is scaled so the overall flagged share tracks the configured
rate. Unflagged mentions of twinned objects lead with the size and
pattern words that actually tell the pair apart, and the
absolute-position instruction is never flagged, so every object keeps
discriminative phrasings for clarification to fall back on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .scenes import BoundingBox, InstructionAnnotation, ObjectInstance, Scene

COLORS = {
    "red": (204, 48, 44),
    "green": (52, 158, 60),
    "blue": (46, 78, 198),
    "yellow": (222, 200, 44),
    "purple": (140, 62, 172),
    "orange": (232, 130, 30),
}
SHAPES = ("circle", "square", "triangle", "bar")
SIZES = ("small", "large")
PATTERNS = ("solid", "striped", "spotted")

BOX_POSITION_NAMES = (
    ("top left", "upper left"),
    ("top right", "upper right"),
    ("bottom left", "lower left"),
    ("bottom right", "lower right"),
)

BACKGROUND = (236, 236, 236)
BOX_BORDER = (90, 90, 90)

BBOX_PAD = 3.0
ORDINAL_WORDS = {2: "second", 3: "third", 4: "fourth"}


@dataclass(frozen=True)
class GeneratorConfig:
    scene_count: int
    min_objects: int = 6
    max_objects: int = 10
    ambiguity_rate: float = 0.0
    image_size: int = 320

    def validate(self):
        if self.scene_count < 1:
            raise ConfigError("scene_count must be positive")
        if not 1 <= self.min_objects <= self.max_objects:
            raise ConfigError("objects-per-scene range is invalid")
        if not 0.0 <= self.ambiguity_rate <= 1.0:
            raise ConfigError("ambiguity_rate must lie in [0, 1]")
        if self.ambiguity_rate > 0 and self.min_objects < 2:
            raise ConfigError("ambiguity requires at least 2 objects per scene")
        if self.image_size < 64:
            raise ConfigError("image_size too small to render 4 boxes")


@dataclass(frozen=True)
class Mention:
    """Semantic content of one instruction, matchable against scene objects."""

    attrs: dict
    box: int | None = None
    ordinal: int | None = None
    next_to: dict | None = None

    def to_dict(self) -> dict:
        return {"attrs": dict(self.attrs), "box": self.box,
                "ordinal": self.ordinal, "next_to": None if self.next_to is None else dict(self.next_to)}

    @staticmethod
    def from_dict(raw: dict) -> "Mention":
        return Mention(attrs=dict(raw["attrs"]), box=raw.get("box"),
                       ordinal=raw.get("ordinal"),
                       next_to=None if raw.get("next_to") is None else dict(raw["next_to"]))


@dataclass
class LabelEntry:
    kind: str
    ambiguous: bool
    referents: list[str]
    mention: Mention


@dataclass
class SceneLabels:
    attributes: dict[str, dict]
    entries: dict[str, list[LabelEntry]]

    def to_dict(self) -> dict:
        return {
            "attributes": self.attributes,
            "instructions": {
                oid: [
                    {"kind": e.kind, "ambiguous": e.ambiguous,
                     "referents": e.referents, "mention": e.mention.to_dict()}
                    for e in entries
                ]
                for oid, entries in self.entries.items()
            },
        }

    @staticmethod
    def from_dict(raw: dict) -> "SceneLabels":
        return SceneLabels(
            attributes={k: dict(v) for k, v in raw["attributes"].items()},
            entries={
                oid: [
                    LabelEntry(e["kind"], e["ambiguous"], list(e["referents"]),
                               Mention.from_dict(e["mention"]))
                    for e in entries
                ]
                for oid, entries in raw["instructions"].items()
            },
        )


@dataclass
class SyntheticDataset:
    scenes: list[Scene]
    labels: dict[str, SceneLabels]


# ---------------------------------------------------------------------------
# geometry and rendering


def grid_boxes(image_size: int) -> list[BoundingBox]:
    """The 2x2 destination-box layout: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right."""
    margin, gap = 6.0, 8.0
    half = (image_size - 2 * margin - gap) / 2.0
    xs = (margin, margin + half + gap)
    ys = (margin, margin + half + gap)
    return [
        BoundingBox(xs[0], ys[0], xs[0] + half, ys[0] + half),
        BoundingBox(xs[1], ys[0], xs[1] + half, ys[0] + half),
        BoundingBox(xs[0], ys[1], xs[0] + half, ys[1] + half),
        BoundingBox(xs[1], ys[1], xs[1] + half, ys[1] + half),
    ]


def shape_extent(shape: str, size: str) -> tuple[float, float]:
    scale = {"small": 24.0, "large": 40.0}[size]
    if shape == "bar":
        return scale * 1.1, scale * 0.35
    if shape == "triangle":
        return scale, scale * 0.9
    return scale, scale


def _shape_mask(shape: str, w: int, h: int) -> np.ndarray:
    ys, xs = np.mgrid[0:h, 0:w]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    if shape == "circle":
        r = min(w, h) / 2.0
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    if shape == "triangle":
        # upward wedge: row width grows linearly from apex to base
        frac = np.clip(ys / max(h - 1, 1), 0.0, 1.0)
        return np.abs(xs - cx) <= frac * (w / 2.0)
    return np.ones((h, w), dtype=bool)  # square and bar fill their extent


def _apply_pattern(tile: np.ndarray, mask: np.ndarray, pattern: str) -> np.ndarray:
    if pattern == "solid":
        return tile
    h, w = mask.shape
    ys, xs = np.mgrid[0:h, 0:w]
    if pattern == "striped":
        dark = (ys // 4) % 2 == 1
    else:  # spotted
        dark = ((xs // 6) % 2 == 1) & ((ys // 6) % 2 == 1)
    shaded = tile.copy()
    shaded[dark & mask] = (shaded[dark & mask] * 0.5).astype(np.uint8)
    return shaded


def render_objects(image_size: int, boxes, specs) -> np.ndarray:
    """Rasterize background, box borders, and object shapes."""
    img = np.full((image_size, image_size, 3), BACKGROUND, dtype=np.uint8)
    for b in boxes:
        x0, y0, x1, y1 = (int(round(v)) for v in (b.x_min, b.y_min, b.x_max, b.y_max))
        img[y0:y0 + 2, x0:x1] = BOX_BORDER
        img[y1 - 2:y1, x0:x1] = BOX_BORDER
        img[y0:y1, x0:x0 + 2] = BOX_BORDER
        img[y0:y1, x1 - 2:x1] = BOX_BORDER
    for spec in specs:
        w, h = shape_extent(spec["shape"], spec["size"])
        w_px, h_px = int(round(w)), int(round(h))
        x0 = int(round(spec["cx"] - w / 2.0))
        y0 = int(round(spec["cy"] - h / 2.0))
        mask = _shape_mask(spec["shape"], w_px, h_px)
        tile = img[y0:y0 + h_px, x0:x0 + w_px].copy()
        tile[mask] = spec["rgb"]
        tile = _apply_pattern(tile, mask, spec["pattern"])
        img[y0:y0 + h_px, x0:x0 + w_px] = tile
    return img


# ---------------------------------------------------------------------------
# referent semantics


def nearest_neighbor_id(scene: Scene, object_id: str) -> str | None:
    target = scene.object_by_id(object_id)
    tx, ty = target.bbox.center
    best, best_d = None, None
    for obj in scene.objects:
        if obj.object_id == object_id:
            continue
        ox, oy = obj.bbox.center
        d = (ox - tx) ** 2 + (oy - ty) ** 2
        if best_d is None or d < best_d:
            best, best_d = obj.object_id, d
    return best


def mention_referents(scene: Scene, attributes: dict[str, dict], mention: Mention) -> list[str]:
    """All objects the mention could denote, by exhaustive matching."""
    candidates = []
    for obj in scene.objects:
        attrs = attributes[obj.object_id]
        if any(attrs.get(k) != v for k, v in mention.attrs.items()):
            continue
        if mention.box is not None and not scene.boxes[mention.box].contains_point(*obj.bbox.center):
            continue
        if mention.next_to is not None:
            nn = nearest_neighbor_id(scene, obj.object_id)
            if nn is None:
                continue
            nn_attrs = attributes[nn]
            if any(nn_attrs.get(k) != v for k, v in mention.next_to.items()):
                continue
        candidates.append(obj)
    candidates.sort(key=lambda o: o.bbox.center[0])
    if mention.ordinal is not None:
        if mention.ordinal <= len(candidates):
            return [candidates[mention.ordinal - 1].object_id]
        return []
    return [o.object_id for o in candidates]


# ---------------------------------------------------------------------------
# instruction phrasing


def _attr_phrase(attrs: dict) -> str:
    parts = []
    for key in ("size", "pattern", "color"):
        if key in attrs:
            parts.append(attrs[key])
    parts.append(attrs.get("shape", "object"))
    return " ".join(parts)


def _dest_clause(box: int, verb: str, rng) -> str:
    pos = BOX_POSITION_NAMES[box][int(rng.integers(2))]
    if verb == "put":
        prep = ("into", "in")[int(rng.integers(2))]
    else:
        prep = "to"
    return f"{prep} the {pos} box"


def _move_verb(rng) -> str:
    return ("move", "put", "take")[int(rng.integers(3))]


def _render_text(kind: str, mention: Mention, dest_box: int, rng) -> str:
    phrase = _attr_phrase(mention.attrs)
    if kind == "position" and mention.box is not None:
        src = BOX_POSITION_NAMES[mention.box][int(rng.integers(2))]
        verb = ("pick", "grab")[int(rng.integers(2))]
        link_verb = ("move", "put")[int(rng.integers(2))]
        dest = _dest_clause(dest_box, link_verb, rng)
        return f"{verb} the {phrase} in the {src} box and {link_verb} it {dest}"
    verb = _move_verb(rng)
    dest = _dest_clause(dest_box, verb, rng)
    if kind == "ordinal" and mention.ordinal is not None:
        if mention.ordinal == 1:
            return f"{verb} the leftmost {phrase} {dest}"
        word = ORDINAL_WORDS.get(mention.ordinal, f"{mention.ordinal}th")
        return f"{verb} the {word} {phrase} from the left {dest}"
    if kind == "relational" and mention.next_to is not None:
        anchor = _attr_phrase(mention.next_to)
        return f"{verb} the {phrase} next to the {anchor} {dest}"
    return f"{verb} the {phrase} {dest}"


# ---------------------------------------------------------------------------
# scene assembly


def _pair_share(rate: float) -> float:
    """Share of objects that get a (color, shape) twin at a given rate."""
    return max(rate, 0.5)


def _flag_probability(rate: float) -> float:
    """Per-instruction flag probability, scaled so that the flagged share
    over all objects tracks the configured rate despite partial pairing."""
    if rate <= 0:
        return 0.0
    return min(1.0, rate / _pair_share(rate))


def _plan_groups(n: int, rate: float, rng) -> list[list[int]]:
    if rate <= 0 or n < 2:
        return [[i] for i in range(n)]
    n_pairs = max(1, min(n // 2, int(round(_pair_share(rate) * n / 2))))
    order = [int(i) for i in rng.permutation(n)]
    groups = [sorted(order[2 * k:2 * k + 2]) for k in range(n_pairs)]
    groups += [[i] for i in order[2 * n_pairs:]]
    return groups


def _place_objects(boxes, plans, image_size, rng):
    """Jittered grid placement inside each destination box.

    Each box's objects get disjoint grid cells, so non-overlap holds by
    construction; jitter keeps layouts varied. Centers also keep globally
    distinct x (>= 3px apart) so ordinal phrasing is well defined. Returns
    per-object (cx, cy), or None when an object cannot fit its cell.
    """
    by_box: dict[int, list[int]] = {}
    for i, plan in enumerate(plans):
        by_box.setdefault(plan["box_index"], []).append(i)
    centers = [None] * len(plans)
    taken_cx = []
    for box_index in sorted(by_box):
        members = by_box[box_index]
        box = boxes[box_index]
        inner = (box.x_min + 4, box.y_min + 4, box.x_max - 4, box.y_max - 4)
        k = len(members)
        cols = int(math.ceil(math.sqrt(k)))
        rows = int(math.ceil(k / cols))
        cell_w = (inner[2] - inner[0]) / cols
        cell_h = (inner[3] - inner[1]) / rows
        cells = [(c, r) for r in range(rows) for c in range(cols)]
        picked = rng.choice(len(cells), size=k, replace=False)
        for i, ci in zip(members, picked):
            c, r = cells[int(ci)]
            w, h = shape_extent(plans[i]["shape"], plans[i]["size"])
            w_tot, h_tot = w + 2 * BBOX_PAD, h + 2 * BBOX_PAD
            free_w = cell_w - w_tot - 2.0
            free_h = cell_h - h_tot - 2.0
            if free_w < 0 or free_h < 0:
                return None
            ok = False
            for _ in range(60):
                cx = inner[0] + c * cell_w + 1.0 + w_tot / 2.0 + rng.uniform(0.0, free_w)
                cy = inner[1] + r * cell_h + 1.0 + h_tot / 2.0 + rng.uniform(0.0, free_h)
                if all(abs(cx - t) >= 3.0 for t in taken_cx):
                    ok = True
                    break
            if not ok:
                return None
            taken_cx.append(cx)
            centers[i] = (cx, cy)
    return centers


def _build_scene(scene_id: str, config: GeneratorConfig, rng) -> tuple[Scene, SceneLabels]:
    n = int(rng.integers(config.min_objects, config.max_objects + 1))
    groups = _plan_groups(n, config.ambiguity_rate, rng)

    combos = [(c, s) for c in COLORS for s in SHAPES]
    combo_idx = rng.choice(len(combos), size=len(groups), replace=False)
    variant_pool = [(sz, pt) for sz in SIZES for pt in PATTERNS]

    plans = [None] * n
    boxes = grid_boxes(config.image_size)
    loads = [0, 0, 0, 0]

    def pick_boxes(count: int) -> list[int]:
        # least-loaded distinct boxes, ties broken randomly: keeps every box
        # at <= ceil(n/4) objects so grid placement always has room
        order = rng.permutation(4)
        ranked = sorted((int(b) for b in order), key=lambda b: loads[b])
        chosen = ranked[:count]
        for b in chosen:
            loads[b] += 1
        return chosen

    for gi, group in enumerate(groups):
        color, shape = combos[int(combo_idx[gi])]
        box_choice = pick_boxes(len(group))
        if len(group) == 1:
            idx = rng.choice(len(variant_pool), size=1, replace=False)
            chosen = [variant_pool[int(idx[0])]]
        else:
            # twins differ in both size and pattern: size shows up in the bbox
            # geometry and pattern in the crop, so wording that singles one
            # out always has a visual footprint to latch onto
            size_order = rng.permutation(len(SIZES))
            pattern_pick = rng.choice(len(PATTERNS), size=len(group), replace=False)
            chosen = [(SIZES[int(size_order[mi % len(SIZES)])], PATTERNS[int(pattern_pick[mi])])
                      for mi in range(len(group))]
        for mi, oi in enumerate(group):
            size, pattern = chosen[mi]
            plans[oi] = {
                "color": color, "shape": shape, "size": size, "pattern": pattern,
                "box_index": int(box_choice[mi]),
            }

    centers = None
    for _ in range(50):
        layout_rng = np.random.default_rng(rng.integers(0, 2**63 - 1))
        centers = _place_objects(boxes, plans, config.image_size, layout_rng)
        if centers is not None:
            break
    if centers is None:
        raise ConfigError("could not place objects without overlap; lower max_objects or raise image_size")

    objects = []
    attributes = {}
    render_specs = []
    for i, plan in enumerate(plans):
        oid = f"obj{i:02d}"
        cx, cy = centers[i]
        w, h = shape_extent(plan["shape"], plan["size"])
        bbox = BoundingBox(cx - w / 2 - BBOX_PAD, cy - h / 2 - BBOX_PAD,
                           cx + w / 2 + BBOX_PAD, cy + h / 2 + BBOX_PAD)
        jitter = rng.integers(-8, 9, size=3)
        rgb = tuple(int(np.clip(c + j, 0, 255)) for c, j in zip(COLORS[plan["color"]], jitter))
        objects.append(ObjectInstance(oid, bbox, []))
        attributes[oid] = {"color": plan["color"], "shape": plan["shape"],
                           "size": plan["size"], "pattern": plan["pattern"]}
        render_specs.append({"shape": plan["shape"], "size": plan["size"],
                             "pattern": plan["pattern"], "cx": cx, "cy": cy, "rgb": rgb})

    image = render_objects(config.image_size, boxes, render_specs)
    scene = Scene(scene_id, config.image_size, config.image_size, boxes, objects, image)

    labels = SceneLabels(attributes=attributes, entries={})
    for obj in scene.objects:
        labels.entries[obj.object_id] = _emit_instructions(scene, attributes, obj, config, rng)
    return scene, labels


def _full_attrs(attrs: dict) -> dict:
    return {k: attrs[k] for k in ("size", "pattern", "color", "shape")}


def _shared_subset(attrs: dict, rng) -> dict:
    if rng.random() < 0.3:
        return {"shape": attrs["shape"]}
    return {"color": attrs["color"], "shape": attrs["shape"]}


def _is_twinned(attributes: dict, oid: str) -> bool:
    me = attributes[oid]
    return any(a["color"] == me["color"] and a["shape"] == me["shape"]
               for other, a in attributes.items() if other != oid)


def _attr_chain(attrs: dict, twinned: bool) -> list[dict]:
    """Candidate attribute subsets for an unambiguous mention, tried in order.

    A twinned object shares color and shape with its partner, so those words
    cannot single it out; its mentions lead with the size and pattern words
    that actually do, which also keeps word overlap with the ambiguous
    phrasing low so clarifier selection favors them.
    """
    if not twinned:
        return [_full_attrs(attrs)]
    return [
        {"pattern": attrs["pattern"]},
        {"size": attrs["size"], "pattern": attrs["pattern"]},
        {"size": attrs["size"], "pattern": attrs["pattern"], "shape": attrs["shape"]},
        _full_attrs(attrs),
    ]


def _emit_instructions(scene: Scene, attributes, obj, config: GeneratorConfig, rng) -> list[LabelEntry]:
    attrs = attributes[obj.object_id]
    oid = obj.object_id
    entries = []

    kinds = ["attribute", "position", "ordinal"]
    if len(scene.objects) >= 2:
        kinds.append("relational")

    flag_prob = _flag_probability(config.ambiguity_rate)
    # every phrasing of the same pick shares one destination, so clarifier
    # turns reinforce the box choice instead of contradicting it
    dest_box = int(rng.integers(4))
    for kind in kinds:
        flagged = (
            kind != "position"
            and len(scene.objects) >= 2
            and flag_prob > 0
            and rng.random() < flag_prob
        )
        if flagged:
            mention = Mention(attrs=_shared_subset(attrs, rng))
            referents = mention_referents(scene, attributes, mention)
            if len(referents) < 2:
                # try color+shape, shared whenever this object has a twin
                mention = Mention(attrs={"color": attrs["color"], "shape": attrs["shape"]})
                referents = mention_referents(scene, attributes, mention)
            if len(referents) < 2:
                # untwinned object: nothing in the scene matches, stay unambiguous
                flagged = False
        if not flagged:
            mention = _unambiguous_mention(scene, attributes, obj, kind)
            referents = mention_referents(scene, attributes, mention)
        if oid not in referents:
            raise AssertionError(f"generator bug: target {oid} not in its referent set")
        if not flagged and len(referents) != 1:
            raise AssertionError(f"generator bug: unflagged instruction with {len(referents)} referents")

        text = _render_text(kind if not flagged else "attribute", mention, dest_box, rng)
        obj.instructions.append(InstructionAnnotation(text, oid, dest_box))
        entries.append(LabelEntry(kind=kind, ambiguous=flagged, referents=referents, mention=mention))
    return entries


def _unambiguous_mention(scene: Scene, attributes, obj, kind: str) -> Mention:
    attrs = attributes[obj.object_id]
    brief = {"color": attrs["color"], "shape": attrs["shape"]}
    oid = obj.object_id
    twinned = _is_twinned(attributes, oid)

    if kind == "attribute":
        for subset in _attr_chain(attrs, twinned):
            mention = Mention(attrs=subset)
            if mention_referents(scene, attributes, mention) == [oid]:
                return mention
        return Mention(attrs=_full_attrs(attrs))

    if kind == "position":
        box = next(i for i, b in enumerate(scene.boxes) if b.contains_point(*obj.bbox.center))
        for subset in _attr_chain(attrs, twinned) if twinned else [brief]:
            mention = Mention(attrs=subset, box=box)
            if mention_referents(scene, attributes, mention) == [oid]:
                return mention
        return Mention(attrs=_full_attrs(attrs), box=box)

    if kind == "ordinal":
        matching = mention_referents(scene, attributes, Mention(attrs=brief))
        rank = matching.index(oid) + 1
        return Mention(attrs=brief, ordinal=rank)

    # relational: anchor on the nearest neighbour
    nn = nearest_neighbor_id(scene, oid)
    anchor = attributes[nn]
    anchor_ref = {"color": anchor["color"], "shape": anchor["shape"]}
    for subset in _attr_chain(attrs, twinned) if twinned else [brief]:
        mention = Mention(attrs=subset, next_to=anchor_ref)
        if mention_referents(scene, attributes, mention) == [oid]:
            return mention
    return Mention(attrs=_full_attrs(attrs), next_to=anchor_ref)


def generate_synthetic_dataset(config: GeneratorConfig, seed: int) -> SyntheticDataset:
    """Deterministically generate scenes with instructions and ground-truth labels."""
    config.validate()
    scenes, labels = [], {}
    for i in range(config.scene_count):
        rng = np.random.default_rng([seed, i])
        scene_id = f"syn{seed}_{i:05d}"
        scene, scene_labels = _build_scene(scene_id, config, rng)
        scenes.append(scene)
        labels[scene_id] = scene_labels
    return SyntheticDataset(scenes, labels)


# ---------------------------------------------------------------------------
# on-disk labels


def save_labels(labels: SceneLabels, root, scene_id: str) -> Path:
    path = Path(root) / f"{scene_id}.labels.json"
    path.write_text(json.dumps(labels.to_dict(), indent=1))
    return path


def load_labels(root, scene_id: str) -> SceneLabels:
    path = Path(root) / f"{scene_id}.labels.json"
    return SceneLabels.from_dict(json.loads(path.read_text()))
