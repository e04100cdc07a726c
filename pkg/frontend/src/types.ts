// Response types for the claripick gateway. Field names mirror the JSON
// published by the server (see GET /schema); the console renders these
// values as-is and never computes scores of its own.

export interface BBox {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export type Phase =
  | "awaiting_instruction"
  | "awaiting_clarification"
  | "resolved"
  | "failed"
  | "committed";

export interface SceneBox extends BBox {
  box_id: number;
}

export interface SceneObject {
  object_id: string;
  bbox: BBox;
  thumbnail: string | null; // base64 PNG crop, when the scene has pixels
}

export interface SceneSummary {
  scene_id: string;
  width: number;
  height: number;
  boxes: SceneBox[];
  objects: SceneObject[];
}

export interface CreateSessionResponse {
  session_id: string;
  scene: SceneSummary;
}

export interface Candidate {
  object_id: string;
  score: number;
  bbox: BBox;
}

export interface BoxCandidate {
  box_id: number;
  prob: number;
}

export interface Resolution {
  object_id: string;
  box_id: number;
}

export interface UtteranceResponse {
  phase: Phase;
  feedback_used: number;
  candidates: Candidate[];
  box_candidates: BoxCandidate[];
  question: string | null;
  resolution: Resolution | null;
}

export interface CommitResponse {
  removed_object_id: string;
  box_id: number;
  correct: boolean | null;
}

export interface TranscriptEvent {
  kind: string;
  [key: string]: unknown;
}

export interface Transcript {
  session_id: string;
  scene_id: string;
  phase: Phase;
  feedback_used: number;
  events: TranscriptEvent[];
}

export interface SessionStatusResponse {
  session_id: string;
  phase: Phase;
  feedback_used: number;
  object_count: number;
  transcript: Transcript;
}

export interface SceneListResponse {
  scene_ids: string[];
}

export interface GatewayError {
  error: {
    code: string;
    message: string;
  };
}
