// Session controller: the single place that talks to the gateway and owns
// the view state. It has no DOM dependencies, so scripted sessions in tests
// drive exactly the code path the browser UI uses.

import { GatewayApiError, GatewayClient } from "./api.js";
import {
  applyCommit,
  applyError,
  applyUtterance,
  beginRequest,
  beginSession,
  controls,
  dismissToast,
  initialState,
  setInput,
  type ViewState,
} from "./state.js";

function errorMessage(err: unknown): string {
  if (err instanceof GatewayApiError) return `${err.code}: ${err.message}`;
  return `network error: ${String(err)}`;
}

export class ConsoleController {
  state: ViewState = initialState();
  private listeners: Array<(state: ViewState) => void> = [];

  constructor(public client: GatewayClient) {}

  onChange(fn: (state: ViewState) => void): void {
    this.listeners.push(fn);
  }

  private update(next: ViewState): void {
    this.state = next;
    for (const fn of this.listeners) fn(next);
  }

  setInput(text: string): void {
    this.update(setInput(this.state, text));
  }

  dismissToast(): void {
    this.update(dismissToast(this.state));
  }

  async newSession(sceneId: string): Promise<void> {
    if (this.state.busy) return;
    this.update(beginRequest(this.state));
    try {
      const resp = await this.client.createSession(sceneId);
      this.update(beginSession(resp));
    } catch (err) {
      this.update(applyError(this.state, errorMessage(err)));
    }
  }

  // Sends the input buffer (or an explicit text) as the next utterance.
  async send(textArg?: string): Promise<void> {
    const text = (textArg ?? this.state.inputBuffer).trim();
    if (!text || !this.state.sessionId || !controls(this.state).send) return;
    this.update(beginRequest(this.state));
    try {
      const resp = await this.client.submitUtterance(this.state.sessionId, text);
      this.update(applyUtterance(this.state, text, resp));
    } catch (err) {
      this.update(applyError(this.state, errorMessage(err)));
    }
  }

  async commit(): Promise<void> {
    if (!this.state.sessionId || !controls(this.state).commit) return;
    this.update(beginRequest(this.state));
    try {
      const resp = await this.client.commitPick(this.state.sessionId);
      this.update(applyCommit(this.state, resp));
    } catch (err) {
      this.update(applyError(this.state, errorMessage(err)));
    }
  }
}
