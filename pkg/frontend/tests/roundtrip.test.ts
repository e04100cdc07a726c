// Scripted operator session: ambiguous utterance -> highlights match the
// API's candidate list -> disambiguating clarification -> Resolved ->
// Committed. Runs against a canned gateway; set CLARIPICK_GATEWAY to also
// run the same script against a live server.

import { describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { ConsoleController } from "../src/console.js";
import { renderScene, type DrawContext } from "../src/render.js";
import { controls, highlightBoxIds, highlightIds } from "../src/state.js";
import type { Phase, SceneSummary, UtteranceResponse } from "../src/types.js";
import {
  ambiguousResponse,
  commitResponse,
  createdResponse,
  jsonResponse,
  resolvedResponse,
} from "./fixtures.js";

function nullContext(): DrawContext {
  return {
    strokeStyle: "",
    fillStyle: "",
    lineWidth: 1,
    globalAlpha: 1,
    font: "",
    clearRect: () => undefined,
    strokeRect: () => undefined,
    fillRect: () => undefined,
    fillText: () => undefined,
    drawImage: () => undefined,
  };
}

// In-memory stand-in for the gateway that also keeps the transcript event
// order the way the server does, so log ordering can be compared.
class FakeGateway {
  events: string[] = [];
  private utterances: UtteranceResponse[];

  constructor(script: UtteranceResponse[]) {
    this.utterances = [...script];
  }

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    if (method === "POST" && url.endsWith("/sessions")) {
      this.events.push("created");
      return jsonResponse(createdResponse(), 201);
    }
    if (method === "POST" && url.endsWith("/utterance")) {
      const resp = this.utterances.shift();
      if (!resp) return jsonResponse({ error: { code: "bad_phase", message: "no more turns" } }, 409);
      this.events.push("utterance");
      if (resp.phase === "awaiting_clarification") this.events.push("prompt");
      if (resp.phase === "resolved") this.events.push("resolved");
      if (resp.phase === "failed") this.events.push("failed");
      return jsonResponse(resp);
    }
    if (method === "POST" && url.endsWith("/commit")) {
      this.events.push("committed");
      return jsonResponse(commitResponse());
    }
    throw new Error(`unexpected request ${method} ${url}`);
  };
}

describe("scripted console round trip", () => {
  it("ambiguous -> clarified -> resolved -> committed, highlights tracking the API", async () => {
    const gateway = new FakeGateway([ambiguousResponse(), resolvedResponse()]);
    const controller = new ConsoleController(new GatewayClient("http://gw", gateway.fetch));

    await controller.newSession("syn11_00000");
    expect(controller.state.phase).toBe("awaiting_instruction");

    controller.setInput("put the yellow triangle in the upper right box");
    await controller.send();
    const afterFirst = controller.state;
    expect(afterFirst.phase).toBe("awaiting_clarification");
    expect(afterFirst.question).toBeTruthy();

    // the canvas highlight count equals the API candidate count
    const summary = renderScene(afterFirst.scene as SceneSummary, nullContext(), {
      highlightObjectIds: highlightIds(afterFirst),
      shadeBoxIds: highlightBoxIds(afterFirst),
    });
    expect(summary.highlightedObjectIds).toHaveLength(ambiguousResponse().candidates.length);
    expect(summary.highlightedObjectIds).toEqual(
      ambiguousResponse().candidates.map((c) => c.object_id),
    );

    await controller.send("the striped one in the top left");
    expect(controller.state.phase).toBe("resolved");
    expect(controls(controller.state).commit).toBe(true);
    expect(controller.state.resolution).toEqual({ object_id: "obj00", box_id: 1 });

    await controller.commit();
    expect(controller.state.phase).toBe("committed");

    // the committed object left the canvas, nothing highlighted anymore
    const finalSummary = renderScene(controller.state.scene as SceneSummary, nullContext(), {
      highlightObjectIds: highlightIds(controller.state),
      shadeBoxIds: highlightBoxIds(controller.state),
    });
    expect(finalSummary.drawnObjectIds).not.toContain("obj00");
    expect(finalSummary.highlightedObjectIds).toHaveLength(0);

    // console log order equals server transcript order
    expect(controller.state.log.map((e) => e.kind)).toEqual(gateway.events);
  });

  it("a transport failure shows a toast and leaves the session intact", async () => {
    const gateway = new FakeGateway([ambiguousResponse()]);
    let broken = false;
    const flaky = async (url: string, init?: RequestInit): Promise<Response> => {
      if (broken) throw new TypeError("fetch failed");
      return gateway.fetch(url, init);
    };
    const controller = new ConsoleController(new GatewayClient("http://gw", flaky));
    await controller.newSession("syn11_00000");
    await controller.send("put the yellow triangle in the upper right box");
    const before = controller.state;

    broken = true;
    await controller.send("the striped one");
    expect(controller.state.toast).toContain("network error");
    expect({ ...controller.state, toast: null }).toEqual({ ...before, toast: null });
  });

  it("keeps one request in flight at a time", async () => {
    let inFlight = 0;
    let peak = 0;
    let release: (() => void) | null = null;
    const gated = async (url: string, init?: RequestInit): Promise<Response> => {
      inFlight += 1;
      peak = Math.max(peak, inFlight);
      await new Promise<void>((resolve) => {
        release = resolve;
      });
      inFlight -= 1;
      return new FakeGateway([ambiguousResponse()]).fetch(url, init);
    };
    const controller = new ConsoleController(new GatewayClient("http://gw", gated));

    const first = controller.newSession("syn11_00000");
    const second = controller.newSession("syn11_00000"); // ignored: busy
    expect(controller.state.busy).toBe(true);
    release!();
    await Promise.all([first, second]);
    expect(peak).toBe(1);
    expect(controller.state.phase).toBe("awaiting_instruction");
  });
});

const LIVE = process.env.CLARIPICK_GATEWAY;

describe.runIf(Boolean(LIVE))("live gateway round trip", () => {
  it(
    "reaches committed against a real server",
    { timeout: 120_000 },
    async () => {
      const client = new GatewayClient(LIVE as string);
      const controller = new ConsoleController(client);
      let sawAmbiguous = false;
      let committed = false;

      for (let seed = 0; seed < 10 && !committed; seed++) {
        const scene = (await client.generateScene(1000 + seed, 1.0)) as unknown as {
          scene_id: string;
          objects: Array<{ instructions: Array<{ text: string }> }>;
        };
        for (const obj of scene.objects) {
          const texts = obj.instructions.map((i) => i.text);
          if (texts.length < 2) continue;
          await controller.newSession(scene.scene_id);
          let turn = 0;
          await controller.send(texts[turn++]);
          while (
            controller.state.phase === "awaiting_clarification" &&
            turn < texts.length
          ) {
            sawAmbiguous = true;
            // highlights always mirror the live candidate list
            expect(highlightIds(controller.state)).toEqual(
              controller.state.candidates.map((c) => c.object_id),
            );
            await controller.send(texts[turn++]);
          }
          if (controller.state.phase === "resolved") {
            await controller.commit();
            expect(controller.state.phase as Phase).toBe("committed");
            committed = true;
            break;
          }
        }
      }
      expect(sawAmbiguous).toBe(true);
      expect(committed).toBe(true);
    },
  );
});
