import { describe, expect, it } from "vitest";

import { renderScene, type DrawContext } from "../src/render.js";
import { sampleScene } from "./fixtures.js";

interface Call {
  op: string;
  stroke: string;
  fill: string;
  args: unknown[];
}

// Records every draw call together with the style active at the time.
function recorder(): { ctx: DrawContext; calls: Call[] } {
  const calls: Call[] = [];
  const ctx = {
    strokeStyle: "",
    fillStyle: "",
    lineWidth: 1,
    globalAlpha: 1,
    font: "",
    clearRect: (...args: unknown[]) => record("clearRect", args),
    strokeRect: (...args: unknown[]) => record("strokeRect", args),
    fillRect: (...args: unknown[]) => record("fillRect", args),
    fillText: (...args: unknown[]) => record("fillText", args),
    drawImage: (...args: unknown[]) => record("drawImage", args),
  } as DrawContext;
  function record(op: string, args: unknown[]) {
    calls.push({ op, stroke: String(ctx.strokeStyle), fill: String(ctx.fillStyle), args });
  }
  return { ctx, calls };
}

const HIGHLIGHT = "#d97706";

describe("scene rendering", () => {
  it("draws every box and every object", () => {
    const { ctx, calls } = recorder();
    const summary = renderScene(sampleScene(), ctx, { highlightObjectIds: [], shadeBoxIds: [] });
    expect(summary.drawnObjectIds).toEqual(["obj00", "obj01", "obj02", "obj03"]);
    const boxLabels = calls.filter((c) => c.op === "fillText");
    expect(boxLabels).toHaveLength(4);
    // 4 box outlines + 4 object outlines, nothing highlighted
    expect(calls.filter((c) => c.op === "strokeRect")).toHaveLength(8);
  });

  it("no candidates means no highlight rects", () => {
    const { ctx, calls } = recorder();
    const summary = renderScene(sampleScene(), ctx, { highlightObjectIds: [], shadeBoxIds: [] });
    expect(summary.highlightedObjectIds).toEqual([]);
    expect(calls.filter((c) => c.op === "strokeRect" && c.stroke === HIGHLIGHT)).toHaveLength(0);
  });

  it("two candidates produce exactly two highlighted rects", () => {
    const { ctx, calls } = recorder();
    const summary = renderScene(sampleScene(), ctx, {
      highlightObjectIds: ["obj00", "obj02"],
      shadeBoxIds: [],
      pulse: 0.5,
    });
    expect(summary.highlightedObjectIds).toEqual(["obj00", "obj02"]);
    expect(calls.filter((c) => c.op === "strokeRect" && c.stroke === HIGHLIGHT)).toHaveLength(2);
  });

  it("candidate boxes are shaded", () => {
    const { ctx, calls } = recorder();
    const summary = renderScene(sampleScene(), ctx, {
      highlightObjectIds: [],
      shadeBoxIds: [1, 3],
    });
    expect(summary.shadedBoxIds).toEqual([1, 3]);
    const shades = calls.filter((c) => c.op === "fillRect" && c.fill.startsWith("rgba(37"));
    expect(shades).toHaveLength(2);
  });

  it("a committed object is gone from the canvas", () => {
    const scene = sampleScene();
    scene.objects = scene.objects.filter((o) => o.object_id !== "obj00");
    const { ctx, calls } = recorder();
    const summary = renderScene(scene, ctx, { highlightObjectIds: [], shadeBoxIds: [] });
    expect(summary.drawnObjectIds).not.toContain("obj00");
    expect(calls.filter((c) => c.op === "strokeRect")).toHaveLength(4 + 3);
  });

  it("uses thumbnails when present and flat fills otherwise", () => {
    const { ctx, calls } = recorder();
    const fakeImage = {} as CanvasImageSource;
    renderScene(sampleScene(), ctx, {
      highlightObjectIds: [],
      shadeBoxIds: [],
      thumbnails: new Map([["obj01", fakeImage]]),
    });
    expect(calls.filter((c) => c.op === "drawImage")).toHaveLength(1);
    const flatFills = calls.filter((c) => c.op === "fillRect" && c.fill === "#999");
    expect(flatFills).toHaveLength(3);
  });
});
