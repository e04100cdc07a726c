"""HTTP/JSON session service for the operator console and scripts.

The service owns a frozen model, a read-only scene store, and a table of
live dialogue sessions with idle expiry. Every engine error maps to one
machine-readable code; responses follow the published JSON schema served
at ``/schema``.
"""

from __future__ import annotations

import base64
import io
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from .dialogue import (DialogueConfig, Session, commit_pick,
                       session_transcript, start_session, submit_utterance)
from .errors import (ClariPickError, EmptyInstructionError, ProtocolError,
                     SceneParseError, SceneValidationError)
from .model import GroundingModel
from .scenes import Scene, crop_region, scene_from_dict, scene_to_dict
from .synthetic import GeneratorConfig, generate_synthetic_dataset

DEFAULT_IDLE_SECONDS = 30 * 60


class ApiException(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


_ENGINE_ERROR_CODES = [
    (ProtocolError, 409, "protocol_violation"),
    (EmptyInstructionError, 422, "empty_instruction"),
    (SceneParseError, 422, "invalid_scene"),
    (SceneValidationError, 422, "invalid_scene"),
]


@dataclass
class ApiSession:
    session: Session | None
    last_access: float
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def expired(self) -> bool:
        return self.session is None


class CreateSessionBody(BaseModel):
    scene_id: str | None = None
    scene: dict | None = None


class UtteranceBody(BaseModel):
    text: str


def _thumbnail(image: np.ndarray | None, bbox) -> str | None:
    if image is None:
        return None
    crop = crop_region(image, bbox)
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(crop)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _scene_summary(scene: Scene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "width": scene.width,
        "height": scene.height,
        "boxes": [{"box_id": i, **b.to_dict()} for i, b in enumerate(scene.boxes)],
        "objects": [
            {"object_id": o.object_id, "bbox": o.bbox.to_dict(),
             "thumbnail": _thumbnail(scene.image, o.bbox)}
            for o in scene.objects
        ],
    }


def _utterance_response(session: Session) -> dict:
    summed = session.aggregate().object_scores
    verdict = session.object_verdict
    box_verdict = session.box_verdict
    box_probs = session.aggregate().box_probs
    bbox_by_id = {o.object_id: o.bbox.to_dict() for o in session.scene.objects}
    response = {
        "phase": session.phase.value,
        "feedback_used": session.feedback_used,
        "candidates": [
            {"object_id": oid, "score": summed[oid], "bbox": bbox_by_id[oid]}
            for oid in verdict.candidates
        ],
        "box_candidates": [
            {"box_id": int(b), "prob": float(box_probs[int(b)])}
            for b in box_verdict.candidates
        ],
        "question": None,
        "resolution": None,
    }
    if session.prompt is not None:
        response["question"] = session.prompt.question_text
    if session.resolution is not None:
        response["resolution"] = {"object_id": session.resolution[0],
                                  "box_id": session.resolution[1]}
    return response


RESPONSE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "claripick gateway responses",
    "$defs": {
        "bbox": {
            "type": "object",
            "properties": {"x_min": {"type": "number"}, "y_min": {"type": "number"},
                           "x_max": {"type": "number"}, "y_max": {"type": "number"}},
            "required": ["x_min", "y_min", "x_max", "y_max"],
            "additionalProperties": False,
        },
        "error": {
            "type": "object",
            "properties": {
                "error": {
                    "type": "object",
                    "properties": {"code": {"type": "string"}, "message": {"type": "string"}},
                    "required": ["code", "message"],
                    "additionalProperties": False,
                },
            },
            "required": ["error"],
            "additionalProperties": False,
        },
        "scene_summary": {
            "type": "object",
            "properties": {
                "scene_id": {"type": "string"},
                "width": {"type": "integer"},
                "height": {"type": "integer"},
                "boxes": {"type": "array", "items": {
                    "type": "object",
                    "properties": {"box_id": {"type": "integer"},
                                   "x_min": {"type": "number"}, "y_min": {"type": "number"},
                                   "x_max": {"type": "number"}, "y_max": {"type": "number"}},
                    "required": ["box_id", "x_min", "y_min", "x_max", "y_max"],
                    "additionalProperties": False,
                }},
                "objects": {"type": "array", "items": {
                    "type": "object",
                    "properties": {"object_id": {"type": "string"},
                                   "bbox": {"$ref": "#/$defs/bbox"},
                                   "thumbnail": {"type": ["string", "null"]}},
                    "required": ["object_id", "bbox", "thumbnail"],
                    "additionalProperties": False,
                }},
            },
            "required": ["scene_id", "width", "height", "boxes", "objects"],
            "additionalProperties": False,
        },
        "create_session": {
            "type": "object",
            "properties": {"session_id": {"type": "string"},
                           "scene": {"$ref": "#/$defs/scene_summary"}},
            "required": ["session_id", "scene"],
            "additionalProperties": False,
        },
        "utterance": {
            "type": "object",
            "properties": {
                "phase": {"enum": ["awaiting_instruction", "awaiting_clarification",
                                   "resolved", "failed", "committed"]},
                "feedback_used": {"type": "integer", "minimum": 0, "maximum": 2},
                "candidates": {"type": "array", "items": {
                    "type": "object",
                    "properties": {"object_id": {"type": "string"},
                                   "score": {"type": "number"},
                                   "bbox": {"$ref": "#/$defs/bbox"}},
                    "required": ["object_id", "score", "bbox"],
                    "additionalProperties": False,
                }},
                "box_candidates": {"type": "array", "items": {
                    "type": "object",
                    "properties": {"box_id": {"type": "integer"},
                                   "prob": {"type": "number"}},
                    "required": ["box_id", "prob"],
                    "additionalProperties": False,
                }},
                "question": {"type": ["string", "null"]},
                "resolution": {
                    "type": ["object", "null"],
                    "properties": {"object_id": {"type": "string"},
                                   "box_id": {"type": "integer"}},
                    "required": ["object_id", "box_id"],
                    "additionalProperties": False,
                },
            },
            "required": ["phase", "feedback_used", "candidates", "box_candidates",
                         "question", "resolution"],
            "additionalProperties": False,
        },
        "commit": {
            "type": "object",
            "properties": {"removed_object_id": {"type": "string"},
                           "box_id": {"type": "integer"},
                           "correct": {"type": ["boolean", "null"]}},
            "required": ["removed_object_id", "box_id", "correct"],
            "additionalProperties": False,
        },
        "session_state": {
            "type": "object",
            "properties": {
                "session_id": {"type": "string"},
                "phase": {"type": "string"},
                "feedback_used": {"type": "integer"},
                "object_count": {"type": "integer"},
                "transcript": {"type": "object"},
            },
            "required": ["session_id", "phase", "feedback_used", "object_count", "transcript"],
            "additionalProperties": False,
        },
    },
}


def create_app(model: GroundingModel, scenes: dict[str, Scene] | None = None,
               idle_seconds: float = DEFAULT_IDLE_SECONDS,
               dialogue_config: DialogueConfig | None = None) -> FastAPI:
    app = FastAPI(title="claripick gateway")
    store: dict[str, Scene] = dict(scenes or {})
    sessions: dict[str, ApiSession] = {}
    store_lock = threading.Lock()
    config = dialogue_config or DialogueConfig()

    @app.exception_handler(ApiException)
    async def on_api_error(request: Request, exc: ApiException):
        return JSONResponse(status_code=exc.status,
                            content={"error": {"code": exc.code, "message": exc.message}})

    @app.exception_handler(ClariPickError)
    async def on_engine_error(request: Request, exc: ClariPickError):
        for etype, status, code in _ENGINE_ERROR_CODES:
            if isinstance(exc, etype):
                return JSONResponse(status_code=status,
                                    content={"error": {"code": code, "message": str(exc)}})
        return JSONResponse(status_code=500,
                            content={"error": {"code": "internal_error", "message": str(exc)}})

    def _live_session(session_id: str) -> ApiSession:
        record = sessions.get(session_id)
        if record is None:
            raise ApiException(404, "session_not_found", f"no session {session_id!r}")
        now = time.monotonic()
        if record.expired or now - record.last_access > idle_seconds:
            record.session = None
            raise ApiException(410, "session_expired", f"session {session_id!r} expired")
        record.last_access = now
        return record

    @app.get("/schema")
    async def get_schema():
        return RESPONSE_SCHEMA

    @app.get("/scenes")
    async def get_scenes(source: str | None = None, seed: int = 0,
                         ambiguity_rate: float = 0.3, min_objects: int = 6,
                         max_objects: int = 10):
        if source == "synthetic":
            cfg = GeneratorConfig(scene_count=1, min_objects=min_objects,
                                  max_objects=max_objects, ambiguity_rate=ambiguity_rate)
            dataset = generate_synthetic_dataset(cfg, seed)
            scene = dataset.scenes[0]
            with store_lock:
                store[scene.scene_id] = scene
            return scene_to_dict(scene)
        with store_lock:
            return {"scene_ids": sorted(store)}

    def _inline_scene(payload: dict) -> Scene:
        payload = dict(payload)
        image_b64 = payload.pop("image_png", None)
        scene = scene_from_dict(payload)
        if image_b64 is not None:
            try:
                raw = base64.b64decode(image_b64)
                image = np.asarray(Image.open(io.BytesIO(raw)).convert("RGB"),
                                   dtype=np.uint8)
            except Exception as exc:
                raise ApiException(422, "invalid_scene",
                                   f"undecodable image_png: {exc}") from exc
            scene = Scene(scene.scene_id, scene.width, scene.height,
                          scene.boxes, scene.objects, image=image)
        if scene.image is None and any(o.features is None for o in scene.objects):
            raise ApiException(422, "invalid_scene",
                               "inline scene needs image_png or per-object features")
        return scene

    @app.post("/sessions", status_code=201)
    async def create_session(body: CreateSessionBody):
        if body.scene is not None:
            scene = _inline_scene(body.scene)
        elif body.scene_id is not None:
            with store_lock:
                scene = store.get(body.scene_id)
            if scene is None:
                raise ApiException(404, "scene_not_found", f"no scene {body.scene_id!r}")
        else:
            raise ApiException(422, "invalid_scene", "provide scene_id or an inline scene")
        session = start_session(scene, model, config, session_id=uuid.uuid4().hex)
        sessions[session.session_id] = ApiSession(session, time.monotonic())
        return {"session_id": session.session_id, "scene": _scene_summary(session.scene)}

    @app.post("/sessions/{session_id}/utterance")
    async def post_utterance(session_id: str, body: UtteranceBody):
        record = _live_session(session_id)
        with record.lock:
            submit_utterance(record.session, body.text)
            return _utterance_response(record.session)

    @app.post("/sessions/{session_id}/commit")
    async def post_commit(session_id: str):
        record = _live_session(session_id)
        with record.lock:
            result = commit_pick(record.session)
            return {"removed_object_id": result.object_id, "box_id": result.box_id,
                    "correct": result.correct}

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        record = _live_session(session_id)
        with record.lock:
            session = record.session
            return {
                "session_id": session.session_id,
                "phase": session.phase.value,
                "feedback_used": session.feedback_used,
                "object_count": len(session.scene.objects),
                "transcript": session_transcript(session),
            }

    return app
