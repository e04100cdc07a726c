"""Candidate-object detection: box utilities and pluggable proposal providers.

Two providers are included. The ground-truth provider passes annotated
boxes through with full confidence, isolating comprehension quality from
detection quality. The objectness baseline is class-agnostic: it finds
connected components that deviate from the background color, boxes them,
and ranks them with a small logistic scorer over region statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, optimize

from .errors import ConfigError
from .scenes import BoundingBox, Scene


@dataclass(frozen=True)
class Proposal:
    bbox: BoundingBox
    objectness: float

    def __post_init__(self):
        if not 0.0 <= self.objectness <= 1.0:
            raise ConfigError(f"objectness {self.objectness} outside [0, 1]")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def nms(proposals: list[Proposal], iou_threshold: float = 0.5) -> list[Proposal]:
    """Greedy suppression: drop proposals overlapping a better kept one."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ConfigError("iou_threshold must lie in (0, 1]")
    ranked = sorted(proposals, key=lambda p: (-p.objectness, p.bbox.x_min, p.bbox.y_min))
    kept: list[Proposal] = []
    for cand in ranked:
        if all(iou(cand.bbox, k.bbox) <= iou_threshold for k in kept):
            kept.append(cand)
    return kept


def propose_ground_truth(scene: Scene, seed: int = 0) -> list[Proposal]:
    """One full-confidence proposal per annotated object, in seeded order."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(scene.objects))
    return [Proposal(scene.objects[i].bbox, 1.0) for i in order]


# ---------------------------------------------------------------------------
# objectness baseline

DEVIATION_TOLERANCE = 40.0
MIN_COMPONENT_AREA = 30
MIN_FILL_RATIO = 0.2


@dataclass
class ObjectnessScorerParams:
    """Logistic scorer over [contrast, fill ratio, size prior]."""

    weights: np.ndarray
    bias: float

    @staticmethod
    def default() -> "ObjectnessScorerParams":
        return ObjectnessScorerParams(np.zeros(3), 0.0)


def _background_color(image: np.ndarray) -> np.ndarray:
    flat = image.reshape(-1, 3)
    colors, counts = np.unique(flat, axis=0, return_counts=True)
    return colors[int(np.argmax(counts))].astype(np.float64)


def _region_features(image, mask, y0, y1, x0, x1, background) -> np.ndarray:
    region = mask[y0:y1, x0:x1]
    pixels = image[y0:y1, x0:x1][region].astype(np.float64)
    contrast = float(np.mean(np.linalg.norm(pixels - background, axis=1))) / 441.7
    fill = float(region.sum()) / region.size
    size_prior = (y1 - y0) * (x1 - x0) / float(image.shape[0] * image.shape[1])
    return np.array([contrast, fill, min(size_prior * 20.0, 1.0)])


def propose_objectness(image: np.ndarray, params: ObjectnessScorerParams | None = None) -> list[Proposal]:
    """Box connected components of background-color deviation and score them.

    Hollow structures such as region borders have low fill ratio inside
    their own bounding box and are filtered out, keeping the detector
    class-agnostic without knowledge of the layout.
    """
    if params is None:
        params = ObjectnessScorerParams.default()
    background = _background_color(image)
    deviation = np.linalg.norm(image.astype(np.float64) - background, axis=2)
    mask = deviation > DEVIATION_TOLERANCE
    if not mask.any():
        return []
    labeled, count = ndimage.label(mask)
    proposals = []
    for idx in range(1, count + 1):
        ys, xs = np.nonzero(labeled == idx)
        if ys.size < MIN_COMPONENT_AREA:
            continue
        y0, y1 = int(ys.min()), int(ys.max()) + 1
        x0, x1 = int(xs.min()), int(xs.max()) + 1
        fill = ys.size / float((y1 - y0) * (x1 - x0))
        if fill < MIN_FILL_RATIO:
            continue
        feats = _region_features(image, labeled == idx, y0, y1, x0, x1, background)
        score = 1.0 / (1.0 + math.exp(-(float(feats @ params.weights) + params.bias)))
        proposals.append(Proposal(BoundingBox(x0, y0, x1, y1), score))
    return nms(proposals, 0.5)


def train_objectness_scorer(scenes: list[Scene], iou_threshold: float = 0.5) -> ObjectnessScorerParams:
    """Fit the logistic scorer on proposals labeled by overlap with annotations."""
    features, targets = [], []
    for scene in scenes:
        if scene.image is None:
            continue
        for prop in propose_objectness(scene.image):
            best = max((iou(prop.bbox, o.bbox) for o in scene.objects), default=0.0)
            background = _background_color(scene.image)
            deviation = np.linalg.norm(scene.image.astype(np.float64) - background, axis=2)
            mask = deviation > DEVIATION_TOLERANCE
            y0, y1 = int(prop.bbox.y_min), int(prop.bbox.y_max)
            x0, x1 = int(prop.bbox.x_min), int(prop.bbox.x_max)
            features.append(_region_features(scene.image, mask, y0, y1, x0, x1, background))
            targets.append(1.0 if best >= iou_threshold else 0.0)
    if not features:
        raise ConfigError("no proposals found; cannot train the objectness scorer")
    x = np.asarray(features)
    y = np.asarray(targets)

    def nll(theta):
        z = x @ theta[:3] + theta[3]
        return float(np.mean(np.logaddexp(0.0, z) - y * z)) + 1e-4 * float(theta @ theta)

    result = optimize.minimize(nll, np.zeros(4), method="BFGS")
    theta = result.x
    return ObjectnessScorerParams(theta[:3].copy(), float(theta[3]))
