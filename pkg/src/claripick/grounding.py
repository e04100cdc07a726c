"""Scoring, ranking, ambiguity detection, and multi-turn aggregation.

An utterance is scored against every candidate object by cosine
similarity in the joint space, and against the four destination boxes by
the destination tower. Confidence requires the best score to beat every
rival by a margin; anything inside the margin stays a candidate. Across
clarification turns, object scores are summed and box logits are summed
then re-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .encoders import ObjectContext, context_from_scene, encode_object, encode_text
from .errors import EmptyInstructionError, ShapeError
from .model import N_BOXES, GroundingModel
from .scenes import Scene
from .text import tokenize


@dataclass
class TurnScores:
    """Per-utterance scores: one cosine per object, one distribution over boxes."""

    utterance: str
    object_scores: dict[str, float]
    box_logits: np.ndarray
    box_probs: np.ndarray = field(init=False)

    def __post_init__(self):
        self.box_logits = np.asarray(self.box_logits, dtype=np.float64)
        if self.box_logits.shape != (N_BOXES,):
            raise ShapeError(f"expected {N_BOXES} box logits, got {self.box_logits.shape}")
        shifted = self.box_logits - self.box_logits.max()
        exp = np.exp(shifted)
        self.box_probs = exp / exp.sum()


@dataclass(frozen=True)
class AmbiguityVerdict:
    candidates: tuple
    confident: bool

    def top(self):
        return self.candidates[0]


def _ranked_ids(scores: dict) -> list:
    return sorted(scores, key=lambda k: (-scores[k], k))


def embed_objects(scene: Scene, model: GroundingModel,
                  context: ObjectContext | None = None,
                  features: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
    """Joint-space vectors for every candidate object, for reuse across turns."""
    if context is None:
        context = context_from_scene(scene)
    if not context.bboxes:
        raise ShapeError("no candidate objects to embed")
    vectors = {}
    for obj_id, bbox in zip(_context_ids(scene, context), context.bboxes):
        feat = None if features is None else features.get(obj_id)
        node = encode_object(bbox, context, model.object, features=feat)
        vectors[obj_id] = node.value.copy()
    return vectors


def _clamped_cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu < ad.EPS_NORM and nv < ad.EPS_NORM:
        return 0.0
    raw = float(u @ v) / (max(nu, ad.EPS_NORM) * max(nv, ad.EPS_NORM))
    return float(np.clip(raw, -1.0, 1.0))


def score_objects(utterance: str, scene: Scene, model: GroundingModel,
                  context: ObjectContext | None = None,
                  features: dict[str, np.ndarray] | None = None,
                  object_vectors: dict[str, np.ndarray] | None = None) -> TurnScores:
    """Score each candidate object and the four boxes for one utterance.

    The candidates default to the scene's annotated objects; pass a
    context built from proposals to ground over detections instead, or
    precomputed ``object_vectors`` to reuse embeddings across turns.
    """
    tokens = tokenize(utterance)
    if not tokens:
        raise EmptyInstructionError("empty instruction")
    indices = model.vocab.encode(tokens)

    if object_vectors is None:
        object_vectors = embed_objects(scene, model, context, features)

    text_vec = encode_text(indices, model.text).value
    object_scores = {obj_id: _clamped_cosine(text_vec, vec)
                     for obj_id, vec in object_vectors.items()}

    box_logits = classify_destination_logits(utterance, model)
    return TurnScores(utterance, object_scores, box_logits)


def _context_ids(scene: Scene, context: ObjectContext) -> list[str]:
    scene_boxes = [o.bbox for o in scene.objects]
    if context.bboxes == scene_boxes:
        return [o.object_id for o in scene.objects]
    return [f"proposal{i:02d}" for i in range(len(context.bboxes))]


def classify_destination_logits(utterance: str, model: GroundingModel) -> np.ndarray:
    tokens = tokenize(utterance)
    if not tokens:
        raise EmptyInstructionError("empty instruction")
    indices = model.vocab.encode(tokens)
    return encode_text(indices, model.destination).value.copy()


def classify_destination(utterance: str, model: GroundingModel) -> np.ndarray:
    """Probabilities over the four destination boxes, text input only."""
    logits = classify_destination_logits(utterance, model)
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def select_topk(turn: TurnScores, k: int) -> list:
    """The k best-scoring object ids, descending, ties by id ascending."""
    if k < 1:
        raise ShapeError("k must be at least 1")
    return _ranked_ids(turn.object_scores)[:k]


def detect_ambiguity(scores: dict, margin: float) -> AmbiguityVerdict:
    """Everything within the margin of the best score stays a candidate.

    The comparison is strict: a rival exactly at the margin is excluded,
    but an exact tie with the maximum always remains a candidate.
    """
    if margin < 0:
        raise ShapeError("margin must be nonnegative")
    if not scores:
        raise ShapeError("no scores to assess")
    best = max(scores.values())
    candidates = [k for k in _ranked_ids(scores)
                  if best - scores[k] < margin or scores[k] == best]
    return AmbiguityVerdict(tuple(candidates), len(candidates) == 1)


def detect_box_ambiguity(turn: TurnScores, margin: float) -> AmbiguityVerdict:
    probs = {i: float(turn.box_probs[i]) for i in range(N_BOXES)}
    return detect_ambiguity(probs, margin)


def aggregate_turns(turns: list[TurnScores]) -> TurnScores:
    """Sum object scores across turns; sum box logits and re-normalize."""
    if not turns:
        raise ShapeError("no turns to aggregate")
    first_keys = set(turns[0].object_scores)
    summed = dict.fromkeys(turns[0].object_scores, 0.0)
    logits = np.zeros(N_BOXES)
    for turn in turns:
        if set(turn.object_scores) != first_keys:
            raise ShapeError("turns cover different object sets")
        for key, value in turn.object_scores.items():
            summed[key] += value
        logits += turn.box_logits
    utterance = " / ".join(t.utterance for t in turns)
    return TurnScores(utterance, summed, logits)
