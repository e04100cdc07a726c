"""Metric suite and the simulated clarification experiment.

Covers top-k selection accuracy, destination accuracy, all-point
interpolated average precision for detection, the least-word-overlap
clarifier rule, and the full ambiguity breakdown report: accuracies with
and without clarification, how often the gold object survives into the
candidate set, and how the margin-based ambiguity flag compares with
ground-truth referent counts.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, ShapeError
from .grounding import (aggregate_turns, detect_ambiguity, detect_box_ambiguity,
                        embed_objects, score_objects, select_topk)
from .model import GroundingModel
from .proposals import Proposal, iou
from .scenes import BoundingBox, InstructionAnnotation, Scene
from .text import tokenize


def topk_accuracy(predictions: list[list], golds: list, k: int) -> float:
    """Fraction of instances whose gold id appears in the first k predictions."""
    if len(predictions) != len(golds):
        raise ShapeError(f"{len(predictions)} prediction lists vs {len(golds)} golds")
    if not predictions:
        raise EvaluationError("no instances to score")
    hits = sum(1 for ranked, gold in zip(predictions, golds) if gold in ranked[:k])
    return hits / len(predictions)


def average_precision(proposals_per_scene: list[list[Proposal]],
                      gold_boxes_per_scene: list[list[BoundingBox]],
                      iou_threshold: float = 0.5) -> float:
    """All-point interpolated AP with greedy matching at the IoU threshold."""
    if len(proposals_per_scene) != len(gold_boxes_per_scene):
        raise ShapeError("proposal and gold lists are misaligned")
    total_gold = sum(len(g) for g in gold_boxes_per_scene)
    if total_gold == 0:
        raise EvaluationError("AP is undefined with zero gold boxes")

    flat = []
    for si, props in enumerate(proposals_per_scene):
        for p in props:
            flat.append((si, p))
    flat.sort(key=lambda e: (-e[1].objectness, e[0], e[1].bbox.x_min, e[1].bbox.y_min))

    matched: list[set] = [set() for _ in gold_boxes_per_scene]
    tp_flags = []
    for si, prop in flat:
        golds = gold_boxes_per_scene[si]
        best_iou, best_idx = 0.0, None
        for gi, gold in enumerate(golds):
            if gi in matched[si]:
                continue
            value = iou(prop.bbox, gold)
            if value > best_iou:
                best_iou, best_idx = value, gi
        if best_idx is not None and best_iou >= iou_threshold:
            matched[si].add(best_idx)
            tp_flags.append(True)
        else:
            tp_flags.append(False)

    if not tp_flags:
        return 0.0
    tps = np.cumsum([1 if f else 0 for f in tp_flags])
    fps = np.cumsum([0 if f else 1 for f in tp_flags])
    recalls = tps / total_gold
    precisions = tps / (tps + fps)

    # envelope from the right, then sum area over recall steps
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    ap = 0.0
    prev_recall = 0.0
    for r, p in zip(recalls, envelope):
        if r > prev_recall:
            ap += (r - prev_recall) * p
            prev_recall = r
    return float(ap)


def least_overlap_clarifier(original: InstructionAnnotation,
                            pool: list[InstructionAnnotation]) -> InstructionAnnotation:
    """The pool entry sharing the fewest token types with the original.

    Ties prefer the shorter candidate, then lexicographic text order.
    """
    if not pool:
        raise EvaluationError("empty clarifier pool")
    base = set(tokenize(original.text))

    def key(ann: InstructionAnnotation):
        tokens = tokenize(ann.text)
        return (len(base & set(tokens)), len(tokens), ann.text)

    return min(pool, key=key)


# ---------------------------------------------------------------------------
# the simulated clarification experiment


@dataclass
class EvalReport:
    topk_accuracy: dict[int, float]
    destination_accuracy: float
    ambiguous_fraction: float
    accuracy_unambiguous: float
    accuracy_ambiguous_top1: float
    accuracy_without_clarification: float
    accuracy_with_clarification: float
    candidate_contains_gold_rate: float
    avg_feedback_count: float
    box_ambiguous_fraction: float
    joint_ambiguous_fraction: float
    detection_ap: float | None = None
    n_instances: int = 0
    n_ambiguous: int = 0
    n_unambiguous: int = 0
    n_correct_unambiguous: int = 0
    n_correct_ambiguous_before: int = 0
    n_correct_ambiguous_after: int = 0
    n_gold_in_candidates: int = 0
    n_clarifier_skipped: int = 0
    flags: list = field(default_factory=list)  # (scene_id, object_id, instr_idx, flagged)

    def to_dict(self) -> dict:
        return {
            "topk_accuracy": {str(k): v for k, v in sorted(self.topk_accuracy.items())},
            "destination_accuracy": self.destination_accuracy,
            "detection_ap": self.detection_ap,
            "ambiguous_fraction": self.ambiguous_fraction,
            "accuracy_unambiguous": self.accuracy_unambiguous,
            "accuracy_ambiguous_top1": self.accuracy_ambiguous_top1,
            "accuracy_without_clarification": self.accuracy_without_clarification,
            "accuracy_with_clarification": self.accuracy_with_clarification,
            "candidate_contains_gold_rate": self.candidate_contains_gold_rate,
            "avg_feedback_count": self.avg_feedback_count,
            "box_ambiguous_fraction": self.box_ambiguous_fraction,
            "joint_ambiguous_fraction": self.joint_ambiguous_fraction,
            "counts": {
                "instances": self.n_instances,
                "ambiguous": self.n_ambiguous,
                "unambiguous": self.n_unambiguous,
                "correct_unambiguous": self.n_correct_unambiguous,
                "correct_ambiguous_before": self.n_correct_ambiguous_before,
                "correct_ambiguous_after": self.n_correct_ambiguous_after,
                "gold_in_candidates": self.n_gold_in_candidates,
                "clarifier_skipped": self.n_clarifier_skipped,
            },
        }


def run_simulated_clarification(validation_scenes: list[Scene], model: GroundingModel,
                                m_obj: float = 0.1, m_box: float = 0.1,
                                max_clarifications: int = 2,
                                topk_values: tuple = (1, 2, 3, 5)) -> EvalReport:
    """Score every validation instruction, clarifying the ambiguous ones.

    The simulated operator answers an ambiguity question with another
    annotation of the same target, chosen by least word overlap with the
    original instruction; scores across turns are summed. Set
    ``max_clarifications=1`` for the single-shot protocol.
    """
    ranked_lists, golds = [], []
    dest_hits = 0
    n_total = n_amb = 0
    correct_unamb = correct_amb_before = correct_amb_after = 0
    gold_in_cand = clarifier_skipped = 0
    feedback_total = 0
    box_amb = joint_amb = 0
    flags = []

    for scene in validation_scenes:
        vectors = embed_objects(scene, model)
        for obj in scene.objects:
            for idx, ann in enumerate(obj.instructions):
                turn = score_objects(ann.text, scene, model, object_vectors=vectors)
                n_total += 1
                ranked = select_topk(turn, len(scene.objects))
                ranked_lists.append(ranked)
                golds.append(obj.object_id)
                if int(np.argmax(turn.box_probs)) == ann.destination_box:
                    dest_hits += 1

                verdict = detect_ambiguity(turn.object_scores, m_obj)
                box_verdict = detect_box_ambiguity(turn, m_box)
                if not box_verdict.confident:
                    box_amb += 1
                if not verdict.confident or not box_verdict.confident:
                    joint_amb += 1
                flags.append((scene.scene_id, obj.object_id, idx, not verdict.confident))

                if verdict.confident:
                    if verdict.top() == obj.object_id:
                        correct_unamb += 1
                    continue

                n_amb += 1
                if obj.object_id in verdict.candidates:
                    gold_in_cand += 1
                if verdict.top() == obj.object_id:
                    correct_amb_before += 1

                turns = [turn]
                used_texts = {ann.text}
                current = verdict
                for _ in range(max_clarifications):
                    if current.confident:
                        break
                    pool = [other for other in obj.instructions
                            if other.text not in used_texts]
                    if not pool:
                        clarifier_skipped += 1
                        break
                    clarifier = least_overlap_clarifier(ann, pool)
                    used_texts.add(clarifier.text)
                    feedback_total += 1
                    turns.append(score_objects(clarifier.text, scene, model,
                                               object_vectors=vectors))
                    summed = aggregate_turns(turns)
                    current = detect_ambiguity(summed.object_scores, m_obj)

                final = aggregate_turns(turns)
                final_ranked = select_topk(final, 1)
                if final_ranked[0] == obj.object_id:
                    correct_amb_after += 1

    if n_total == 0:
        raise EvaluationError("no validation instructions to evaluate")

    n_unamb = n_total - n_amb
    report = EvalReport(
        topk_accuracy={k: topk_accuracy(ranked_lists, golds, k) for k in topk_values},
        destination_accuracy=dest_hits / n_total,
        ambiguous_fraction=n_amb / n_total,
        accuracy_unambiguous=correct_unamb / n_unamb if n_unamb else 0.0,
        accuracy_ambiguous_top1=correct_amb_before / n_amb if n_amb else 0.0,
        accuracy_without_clarification=(correct_unamb + correct_amb_before) / n_total,
        accuracy_with_clarification=(correct_unamb + correct_amb_after) / n_total,
        candidate_contains_gold_rate=gold_in_cand / n_amb if n_amb else 1.0,
        avg_feedback_count=feedback_total / n_total,
        box_ambiguous_fraction=box_amb / n_total,
        joint_ambiguous_fraction=joint_amb / n_total,
        n_instances=n_total,
        n_ambiguous=n_amb,
        n_unambiguous=n_unamb,
        n_correct_unambiguous=correct_unamb,
        n_correct_ambiguous_before=correct_amb_before,
        n_correct_ambiguous_after=correct_amb_after,
        n_gold_in_candidates=gold_in_cand,
        n_clarifier_skipped=clarifier_skipped,
        flags=flags,
    )
    return report


@dataclass(frozen=True)
class AmbiguityQuality:
    precision: float
    recall: float
    true_positive: int
    false_positive: int
    false_negative: int
    true_negative: int


def ambiguity_detector_quality(report: EvalReport, labels: dict) -> AmbiguityQuality:
    """Compare margin-based flags with the generator's referent-count truth.

    ``labels`` maps scene_id to the generator's per-scene labels, whose
    entries hold referent sets per (object, instruction index).
    """
    tp = fp = fn = tn = 0
    for scene_id, object_id, idx, flagged in report.flags:
        entry = labels[scene_id].entries[object_id][idx]
        truly = len(entry.referents) > 1
        if flagged and truly:
            tp += 1
        elif flagged and not truly:
            fp += 1
        elif not flagged and truly:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else (1.0 if fn == 0 else 0.0)
    recall = tp / (tp + fn) if tp + fn else 1.0
    return AmbiguityQuality(precision, recall, tp, fp, fn, tn)


# ---------------------------------------------------------------------------
# report formatting

_CSV_FIELDS = [
    "instances", "ambiguous_fraction", "accuracy_unambiguous",
    "accuracy_ambiguous_top1", "accuracy_without_clarification",
    "accuracy_with_clarification", "candidate_contains_gold_rate",
    "avg_feedback_count", "destination_accuracy", "detection_ap",
    "top1", "top2", "top3", "top5",
]


def emit_report(report: EvalReport, format: str = "table") -> str:
    """Render a report as json, csv, or a human-readable table."""
    if format == "json":
        return json.dumps(report.to_dict(), indent=1, sort_keys=True)
    if format == "csv":
        values = {
            "instances": report.n_instances,
            "ambiguous_fraction": report.ambiguous_fraction,
            "accuracy_unambiguous": report.accuracy_unambiguous,
            "accuracy_ambiguous_top1": report.accuracy_ambiguous_top1,
            "accuracy_without_clarification": report.accuracy_without_clarification,
            "accuracy_with_clarification": report.accuracy_with_clarification,
            "candidate_contains_gold_rate": report.candidate_contains_gold_rate,
            "avg_feedback_count": report.avg_feedback_count,
            "destination_accuracy": report.destination_accuracy,
            "detection_ap": "" if report.detection_ap is None else report.detection_ap,
            "top1": report.topk_accuracy.get(1, ""),
            "top2": report.topk_accuracy.get(2, ""),
            "top3": report.topk_accuracy.get(3, ""),
            "top5": report.topk_accuracy.get(5, ""),
        }
        out = io.StringIO()
        out.write(",".join(_CSV_FIELDS) + "\n")
        out.write(",".join(str(values[f]) for f in _CSV_FIELDS) + "\n")
        return out.getvalue()
    if format == "table":
        rows = [
            ("instances", f"{report.n_instances}"),
            ("ambiguous fraction", f"{report.ambiguous_fraction:.3f}"),
            ("unambiguous top-1", f"{report.accuracy_unambiguous:.3f}"),
            ("ambiguous top-1", f"{report.accuracy_ambiguous_top1:.3f}"),
            ("total without clarification", f"{report.accuracy_without_clarification:.3f}"),
            ("total with clarification", f"{report.accuracy_with_clarification:.3f}"),
            ("gold in candidates", f"{report.candidate_contains_gold_rate:.3f}"),
            ("avg feedback count", f"{report.avg_feedback_count:.3f}"),
            ("destination accuracy", f"{report.destination_accuracy:.3f}"),
        ]
        if report.detection_ap is not None:
            rows.append(("detection AP", f"{report.detection_ap:.3f}"))
        for k in sorted(report.topk_accuracy):
            rows.append((f"top-{k} accuracy", f"{report.topk_accuracy[k]:.3f}"))
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows) + "\n"
    raise EvaluationError(f"unknown report format {format!r}")
