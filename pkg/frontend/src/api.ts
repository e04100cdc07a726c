import type {
  CommitResponse,
  CreateSessionResponse,
  SceneListResponse,
  SessionStatusResponse,
  UtteranceResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

// Raised for any response the gateway itself produced (4xx/5xx with a JSON
// error body); plain network failures propagate as whatever fetch threw.
export class GatewayApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "GatewayApiError";
  }
}

async function parseError(resp: Response): Promise<GatewayApiError> {
  let code = "unknown";
  let message = `gateway returned ${resp.status}`;
  try {
    const body = await resp.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body, keep the generic message
  }
  return new GatewayApiError(resp.status, code, message);
}

export class GatewayClient {
  private fetchImpl: FetchLike;

  constructor(
    public baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  listScenes(): Promise<SceneListResponse> {
    return this.request("GET", "/scenes");
  }

  // Asks the gateway to generate a fresh synthetic scene and add it to the pool.
  generateScene(seed: number, ambiguityRate = 0.3): Promise<Record<string, unknown>> {
    return this.request(
      "GET",
      `/scenes?source=synthetic&seed=${seed}&ambiguity_rate=${ambiguityRate}`,
    );
  }

  createSession(sceneId: string): Promise<CreateSessionResponse> {
    return this.request("POST", "/sessions", { scene_id: sceneId });
  }

  submitUtterance(sessionId: string, text: string): Promise<UtteranceResponse> {
    return this.request("POST", `/sessions/${sessionId}/utterance`, { text });
  }

  commitPick(sessionId: string): Promise<CommitResponse> {
    return this.request("POST", `/sessions/${sessionId}/commit`);
  }

  getSession(sessionId: string): Promise<SessionStatusResponse> {
    return this.request("GET", `/sessions/${sessionId}`);
  }
}
