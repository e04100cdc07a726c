"""Interactive clarification sessions.

A session walks instruction → (clarification)* → resolution. Every
utterance is scored, summed with prior turns, and checked for ambiguity
on both the object margin and the box margin. Ambiguity triggers a
templated question with the candidates highlighted; two clarifications
are the budget, after which an ambiguous session fails. A resolved
session can commit its pick once, which removes the object from the
session's private scene copy.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from enum import Enum

from .errors import EmptyInstructionError, ProtocolError, SceneValidationError
from .grounding import (AmbiguityVerdict, TurnScores, aggregate_turns,
                        detect_ambiguity, detect_box_ambiguity, embed_objects,
                        score_objects)
from .model import GroundingModel
from .scenes import Scene
from .text import tokenize


class Phase(str, Enum):
    AWAITING_INSTRUCTION = "awaiting_instruction"
    AWAITING_CLARIFICATION = "awaiting_clarification"
    RESOLVED = "resolved"
    FAILED = "failed"
    COMMITTED = "committed"


FEEDBACK_BUDGET = 2


@dataclass(frozen=True)
class DialogueConfig:
    object_margin: float = 0.1
    box_margin: float = 0.1
    feedback_budget: int = FEEDBACK_BUDGET


@dataclass(frozen=True)
class ClarificationPrompt:
    question_text: str
    highlighted_object_ids: tuple
    highlighted_box_ids: tuple


@dataclass(frozen=True)
class PickResult:
    object_id: str
    box_id: int
    correct: bool | None


@dataclass
class Session:
    session_id: str
    scene: Scene
    model: GroundingModel
    config: DialogueConfig
    phase: Phase = Phase.AWAITING_INSTRUCTION
    turns: list[TurnScores] = field(default_factory=list)
    feedback_used: int = 0
    object_verdict: AmbiguityVerdict | None = None
    box_verdict: AmbiguityVerdict | None = None
    prompt: ClarificationPrompt | None = None
    resolution: tuple | None = None
    events: list[dict] = field(default_factory=list)
    _object_vectors: dict = field(default_factory=dict, repr=False)

    def aggregate(self) -> TurnScores:
        return aggregate_turns(self.turns)


def start_session(scene: Scene, model: GroundingModel,
                  config: DialogueConfig | None = None,
                  session_id: str | None = None) -> Session:
    """Open a session on a private copy of the scene."""
    if not scene.objects:
        raise SceneValidationError("cannot open a session on a scene with no objects")
    session = Session(
        session_id=session_id or uuid.uuid4().hex,
        scene=scene.copy(),
        model=model,
        config=config or DialogueConfig(),
    )
    session._object_vectors = embed_objects(session.scene, model)
    session.events.append({"kind": "created", "scene_id": scene.scene_id,
                           "object_count": len(scene.objects)})
    return session


def generate_question(object_verdict: AmbiguityVerdict,
                      box_verdict: AmbiguityVerdict) -> ClarificationPrompt:
    """Template question covering whichever verdicts are ambiguous."""
    if object_verdict.confident and box_verdict.confident:
        raise ProtocolError("no ambiguity to clarify")
    parts = []
    objects: tuple = ()
    boxes: tuple = ()
    if not object_verdict.confident:
        objects = object_verdict.candidates
        parts.append(f"Which one do you mean? I see {len(objects)} possible matches.")
    if not box_verdict.confident:
        boxes = box_verdict.candidates
        parts.append("Which box should I put it in?")
    return ClarificationPrompt(" ".join(parts), objects, boxes)


def submit_utterance(session: Session, text: str) -> Session:
    """Score an utterance, fold it into the session, and advance the phase."""
    if session.phase not in (Phase.AWAITING_INSTRUCTION, Phase.AWAITING_CLARIFICATION):
        raise ProtocolError(f"session is {session.phase.value}; no utterance expected")
    if not tokenize(text):
        raise EmptyInstructionError("empty instruction")

    if session.phase is Phase.AWAITING_CLARIFICATION:
        session.feedback_used += 1

    turn = score_objects(text, session.scene, session.model,
                         object_vectors=session._object_vectors)
    session.turns.append(turn)
    summed = session.aggregate()
    session.object_verdict = detect_ambiguity(summed.object_scores,
                                              session.config.object_margin)
    session.box_verdict = detect_box_ambiguity(summed, session.config.box_margin)
    session.events.append({
        "kind": "utterance", "text": text,
        "object_scores": dict(turn.object_scores),
        "box_probs": turn.box_probs.tolist(),
        "summed_scores": dict(summed.object_scores),
        "object_candidates": list(session.object_verdict.candidates),
        "box_candidates": list(session.box_verdict.candidates),
        "feedback_used": session.feedback_used,
    })

    if session.object_verdict.confident and session.box_verdict.confident:
        session.phase = Phase.RESOLVED
        session.prompt = None
        session.resolution = (session.object_verdict.top(), int(session.box_verdict.top()))
        session.events.append({"kind": "resolved",
                               "object_id": session.resolution[0],
                               "box_id": session.resolution[1]})
    elif session.feedback_used < session.config.feedback_budget:
        session.phase = Phase.AWAITING_CLARIFICATION
        session.prompt = generate_question(session.object_verdict, session.box_verdict)
        session.events.append({"kind": "prompt",
                               "question": session.prompt.question_text,
                               "objects": list(session.prompt.highlighted_object_ids),
                               "boxes": list(session.prompt.highlighted_box_ids)})
    else:
        session.phase = Phase.FAILED
        session.prompt = None
        session.events.append({"kind": "failed",
                               "feedback_used": session.feedback_used})
    return session


def _gold_for_first_turn(session: Session):
    """Gold target for the opening instruction, when it matches an annotation."""
    if not session.turns:
        return None
    first = session.turns[0].utterance
    for obj in session.scene.objects:
        for ann in obj.instructions:
            if ann.text == first:
                return ann.target_object_id, ann.destination_box
    return None


def commit_pick(session: Session, gold: tuple | None = None) -> PickResult:
    """Execute the resolved pick: remove the object from the session's scene."""
    if session.phase is not Phase.RESOLVED:
        raise ProtocolError(f"cannot commit while session is {session.phase.value}")
    object_id, box_id = session.resolution
    if gold is None:
        gold = _gold_for_first_turn(session)
    correct = None if gold is None else (object_id, box_id) == (gold[0], int(gold[1]))

    target = session.scene.object_by_id(object_id)
    session.scene.objects.remove(target)
    session.phase = Phase.COMMITTED
    session.events.append({"kind": "committed", "object_id": object_id,
                           "box_id": box_id, "correct": correct})
    return PickResult(object_id, box_id, correct)


def session_transcript(session: Session) -> dict:
    """Serializable event log of everything that happened in the session."""
    return {
        "session_id": session.session_id,
        "scene_id": session.scene.scene_id,
        "phase": session.phase.value,
        "feedback_used": session.feedback_used,
        "events": [dict(e) for e in session.events],
    }


def replay_transcript(transcript: dict, scene: Scene, model: GroundingModel,
                      config: DialogueConfig | None = None) -> Session:
    """Re-run a transcript's utterances; commits are replayed as well."""
    session = start_session(scene, model, config,
                            session_id=transcript.get("session_id"))
    for event in transcript["events"]:
        if event["kind"] == "utterance":
            submit_utterance(session, event["text"])
        elif event["kind"] == "committed":
            commit_pick(session)
    return session
