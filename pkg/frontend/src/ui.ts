// DOM shell around ConsoleController: builds the widgets, projects the view
// state into them, and runs the pulse animation for candidate highlights.
// Browser-only; everything with logic worth testing lives in the imported
// modules.

import type { ConsoleController } from "./console.js";
import { renderScene } from "./render.js";
import { SpeechInput, type SpeechHost } from "./speech.js";
import { banner, controls, highlightBoxIds, highlightIds, type ViewState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function mountConsole(
  root: HTMLElement,
  controller: ConsoleController,
  sceneIds: string[],
  speechHost: SpeechHost = window as unknown as SpeechHost,
): void {
  const bannerEl = el("div", "banner", "no session");
  const feedbackEl = el("span", "feedback", "");
  const toastEl = el("div", "toast");
  toastEl.hidden = true;

  const canvas = el("canvas", "scene");
  const ctx = canvas.getContext("2d");

  const scenePicker = el("select", "scene-picker");
  for (const id of sceneIds) {
    const opt = el("option", undefined, id);
    opt.value = id;
    scenePicker.appendChild(opt);
  }
  const newSessionBtn = el("button", "new-session", "new session");
  newSessionBtn.onclick = () => void controller.newSession(scenePicker.value);

  const input = el("input", "utterance");
  input.type = "text";
  input.placeholder = "instruction...";
  input.oninput = () => controller.setInput(input.value);
  input.onkeydown = (ev) => {
    if (ev.key === "Enter") void controller.send();
  };
  const sendBtn = el("button", "send", "send");
  sendBtn.onclick = () => void controller.send();
  const commitBtn = el("button", "commit", "commit pick");
  commitBtn.onclick = () => void controller.commit();

  // mic appears only when the browser can actually recognize speech
  const speech = new SpeechInput(speechHost);
  const micBtn = el("button", "mic", "speak");
  micBtn.hidden = !speech.supported;
  speech.onTranscript((text) => {
    controller.setInput(text);
    input.value = text; // operator reviews and presses send themselves
  });
  micBtn.onclick = () => speech.start();

  const logEl = el("ul", "log");

  const controlsRow = el("div", "controls");
  controlsRow.append(input, micBtn, sendBtn, commitBtn, scenePicker, newSessionBtn);
  root.append(bannerEl, feedbackEl, toastEl, canvas, controlsRow, logEl);

  const thumbnails = new Map<string, CanvasImageSource>();
  let thumbnailSession: string | null = null;
  let pulse = 0;

  function loadThumbnails(state: ViewState): void {
    if (!state.scene || state.sessionId === thumbnailSession) return;
    thumbnailSession = state.sessionId;
    thumbnails.clear();
    for (const obj of state.scene.objects) {
      if (!obj.thumbnail) continue;
      const img = new Image();
      img.onload = () => draw(controller.state);
      img.src = `data:image/png;base64,${obj.thumbnail}`;
      thumbnails.set(obj.object_id, img);
    }
  }

  function draw(state: ViewState): void {
    if (!state.scene || !ctx) return;
    canvas.width = state.scene.width;
    canvas.height = state.scene.height;
    renderScene(state.scene, ctx, {
      highlightObjectIds: highlightIds(state),
      shadeBoxIds: highlightBoxIds(state),
      pulse,
      thumbnails,
    });
  }

  function tick(): void {
    pulse = (Math.sin(Date.now() / 300) + 1) / 2;
    if (controller.state.candidates.length > 0) draw(controller.state);
    requestAnimationFrame(tick);
  }
  requestAnimationFrame(tick);

  controller.onChange((state) => {
    bannerEl.textContent = banner(state);
    feedbackEl.textContent = state.phase ? `clarifications used: ${state.feedbackUsed}` : "";
    toastEl.hidden = state.toast === null;
    toastEl.textContent = state.toast ?? "";

    const enabled = controls(state);
    input.disabled = !enabled.send;
    sendBtn.disabled = !enabled.send;
    micBtn.disabled = !enabled.send;
    commitBtn.disabled = !enabled.commit;
    newSessionBtn.disabled = !enabled.newSession;
    if (state.inputBuffer !== input.value) input.value = state.inputBuffer;

    logEl.replaceChildren(
      ...state.log.map((entry) => el("li", `log-${entry.kind}`, `${entry.kind}: ${entry.text}`)),
    );

    loadThumbnails(state);
    draw(state);
    if (state.phase === "awaiting_clarification") input.focus();
  });
}
