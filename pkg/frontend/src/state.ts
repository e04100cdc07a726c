// View model for the operator console. All transitions are pure so the
// DOM layer stays a thin projection of this state. Log entry kinds reuse
// the server's transcript event kinds, which makes "console log order ==
// server transcript order" directly checkable.

import type {
  BoxCandidate,
  Candidate,
  CommitResponse,
  CreateSessionResponse,
  Phase,
  Resolution,
  SceneSummary,
  UtteranceResponse,
} from "./types.js";

export type LogKind = "created" | "utterance" | "prompt" | "resolved" | "failed" | "committed";

export interface LogEntry {
  kind: LogKind;
  text: string;
}

export interface ViewState {
  sessionId: string | null;
  scene: SceneSummary | null;
  phase: Phase | null;
  feedbackUsed: number;
  candidates: Candidate[]; // the highlight set, always the latest response's
  boxCandidates: BoxCandidate[];
  question: string | null;
  resolution: Resolution | null;
  inputBuffer: string;
  log: LogEntry[];
  busy: boolean; // one request in flight at a time
  toast: string | null;
  commitResult: CommitResponse | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    scene: null,
    phase: null,
    feedbackUsed: 0,
    candidates: [],
    boxCandidates: [],
    question: null,
    resolution: null,
    inputBuffer: "",
    log: [],
    busy: false,
    toast: null,
    commitResult: null,
  };
}

export function beginSession(resp: CreateSessionResponse): ViewState {
  return {
    ...initialState(),
    sessionId: resp.session_id,
    scene: resp.scene,
    phase: "awaiting_instruction",
    log: [{ kind: "created", text: `session on scene ${resp.scene.scene_id}` }],
  };
}

export function setInput(state: ViewState, text: string): ViewState {
  return { ...state, inputBuffer: text };
}

export function beginRequest(state: ViewState): ViewState {
  return { ...state, busy: true, toast: null };
}

export function applyUtterance(state: ViewState, text: string, resp: UtteranceResponse): ViewState {
  const log = [...state.log, { kind: "utterance" as LogKind, text }];
  if (resp.phase === "awaiting_clarification" && resp.question) {
    log.push({ kind: "prompt", text: resp.question });
  } else if (resp.phase === "resolved" && resp.resolution) {
    log.push({
      kind: "resolved",
      text: `pick ${resp.resolution.object_id} into box ${resp.resolution.box_id}`,
    });
  } else if (resp.phase === "failed") {
    log.push({ kind: "failed", text: "could not narrow it down; start a new session" });
  }
  return {
    ...state,
    phase: resp.phase,
    feedbackUsed: resp.feedback_used,
    candidates: resp.candidates,
    boxCandidates: resp.box_candidates,
    question: resp.question,
    resolution: resp.resolution,
    inputBuffer: "",
    log,
    busy: false,
    toast: null,
  };
}

export function applyCommit(state: ViewState, resp: CommitResponse): ViewState {
  const scene = state.scene
    ? {
        ...state.scene,
        objects: state.scene.objects.filter((o) => o.object_id !== resp.removed_object_id),
      }
    : null;
  const graded =
    resp.correct === null ? "" : resp.correct ? " (matches the label)" : " (label disagrees)";
  return {
    ...state,
    scene,
    phase: "committed",
    candidates: [],
    boxCandidates: [],
    question: null,
    log: [
      ...state.log,
      {
        kind: "committed",
        text: `removed ${resp.removed_object_id} into box ${resp.box_id}${graded}`,
      },
    ],
    busy: false,
    commitResult: resp,
  };
}

// Request failures never destroy session state; they only surface a toast.
export function applyError(state: ViewState, message: string): ViewState {
  return { ...state, busy: false, toast: message };
}

export function dismissToast(state: ViewState): ViewState {
  return { ...state, toast: null };
}

export interface Controls {
  send: boolean;
  commit: boolean;
  newSession: boolean;
}

export function controls(state: ViewState): Controls {
  const terminal = state.phase === "failed" || state.phase === "committed";
  const awaiting = state.phase === "awaiting_instruction" || state.phase === "awaiting_clarification";
  return {
    send: awaiting && !state.busy && !terminal,
    commit: state.phase === "resolved" && !state.busy,
    newSession: !state.busy,
  };
}

export function banner(state: ViewState): string {
  switch (state.phase) {
    case null:
      return "no session";
    case "awaiting_instruction":
      return "say what to pick";
    case "awaiting_clarification":
      return state.question ?? "please clarify";
    case "resolved":
      return state.resolution
        ? `ready: ${state.resolution.object_id} to box ${state.resolution.box_id}`
        : "ready";
    case "failed":
      return "out of clarifications; start a new session";
    case "committed":
      return "pick committed";
  }
}

// Object ids the canvas should highlight; by construction this is exactly
// the candidate list of the latest gateway response.
export function highlightIds(state: ViewState): string[] {
  return state.candidates.map((c) => c.object_id);
}

export function highlightBoxIds(state: ViewState): number[] {
  return state.boxCandidates.map((b) => b.box_id);
}
