// Canned gateway bodies used by the unit tests. Shapes match the server's
// published schema; values are trimmed from a captured live session.

import type {
  CommitResponse,
  CreateSessionResponse,
  SceneSummary,
  UtteranceResponse,
} from "../src/types.js";

export function sampleScene(): SceneSummary {
  return {
    scene_id: "syn11_00000",
    width: 320,
    height: 320,
    boxes: [
      { box_id: 0, x_min: 6, y_min: 6, x_max: 156, y_max: 156 },
      { box_id: 1, x_min: 164, y_min: 6, x_max: 314, y_max: 156 },
      { box_id: 2, x_min: 6, y_min: 164, x_max: 156, y_max: 314 },
      { box_id: 3, x_min: 164, y_min: 164, x_max: 314, y_max: 314 },
    ],
    objects: [
      {
        object_id: "obj00",
        bbox: { x_min: 30.3, y_min: 22.7, x_max: 60.3, y_max: 50.3 },
        thumbnail: null,
      },
      {
        object_id: "obj01",
        bbox: { x_min: 200.1, y_min: 40.5, x_max: 240.1, y_max: 66.5 },
        thumbnail: null,
      },
      {
        object_id: "obj02",
        bbox: { x_min: 251.4, y_min: 231.8, x_max: 297.4, y_max: 273.8 },
        thumbnail: null,
      },
      {
        object_id: "obj03",
        bbox: { x_min: 52.9, y_min: 210.0, x_max: 92.9, y_max: 238.0 },
        thumbnail: null,
      },
    ],
  };
}

export function createdResponse(): CreateSessionResponse {
  return { session_id: "abc123", scene: sampleScene() };
}

export function ambiguousResponse(): UtteranceResponse {
  return {
    phase: "awaiting_clarification",
    feedback_used: 0,
    candidates: [
      {
        object_id: "obj00",
        score: 0.544,
        bbox: { x_min: 30.3, y_min: 22.7, x_max: 60.3, y_max: 50.3 },
      },
      {
        object_id: "obj02",
        score: 0.502,
        bbox: { x_min: 251.4, y_min: 231.8, x_max: 297.4, y_max: 273.8 },
      },
    ],
    box_candidates: [
      { box_id: 0, prob: 0.255 },
      { box_id: 1, prob: 0.254 },
    ],
    question: "Which one do you mean? I see 2 possible matches. Which box should I put it in?",
    resolution: null,
  };
}

export function resolvedResponse(): UtteranceResponse {
  return {
    phase: "resolved",
    feedback_used: 1,
    candidates: [
      {
        object_id: "obj00",
        score: 1.19,
        bbox: { x_min: 30.3, y_min: 22.7, x_max: 60.3, y_max: 50.3 },
      },
    ],
    box_candidates: [{ box_id: 1, prob: 0.61 }],
    question: null,
    resolution: { object_id: "obj00", box_id: 1 },
  };
}

export function failedResponse(): UtteranceResponse {
  return {
    phase: "failed",
    feedback_used: 2,
    candidates: ambiguousResponse().candidates,
    box_candidates: ambiguousResponse().box_candidates,
    question: null,
    resolution: null,
  };
}

export function commitResponse(): CommitResponse {
  return { removed_object_id: "obj00", box_id: 1, correct: true };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
