// Canvas drawing for the scene view. The context is typed structurally so
// tests can pass a recording stub; the browser hands in a real
// CanvasRenderingContext2D.

import type { BBox, SceneSummary } from "./types.js";

export interface DrawContext {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  drawImage(image: CanvasImageSource, x: number, y: number, w: number, h: number): void;
}

export interface RenderOptions {
  highlightObjectIds: string[];
  shadeBoxIds: number[];
  // 0..1 phase of the pulse animation for highlighted outlines
  pulse?: number;
  thumbnails?: Map<string, CanvasImageSource>;
}

export interface RenderSummary {
  drawnObjectIds: string[];
  highlightedObjectIds: string[];
  shadedBoxIds: number[];
}

const BOX_COLOR = "#555";
const OBJECT_COLOR = "#999";
const HIGHLIGHT_COLOR = "#d97706";
const SHADE_COLOR = "rgba(37, 99, 235, 0.18)";

function rectArgs(b: BBox): [number, number, number, number] {
  return [b.x_min, b.y_min, b.x_max - b.x_min, b.y_max - b.y_min];
}

export function renderScene(
  scene: SceneSummary,
  ctx: DrawContext,
  opts: RenderOptions,
): RenderSummary {
  const highlight = new Set(opts.highlightObjectIds);
  const shade = new Set(opts.shadeBoxIds);
  const pulse = opts.pulse ?? 0;
  const summary: RenderSummary = {
    drawnObjectIds: [],
    highlightedObjectIds: [],
    shadedBoxIds: [],
  };

  ctx.clearRect(0, 0, scene.width, scene.height);

  for (const box of scene.boxes) {
    if (shade.has(box.box_id)) {
      ctx.globalAlpha = 1;
      ctx.fillStyle = SHADE_COLOR;
      ctx.fillRect(...rectArgs(box));
      summary.shadedBoxIds.push(box.box_id);
    }
    ctx.globalAlpha = 1;
    ctx.lineWidth = 1;
    ctx.strokeStyle = BOX_COLOR;
    ctx.strokeRect(...rectArgs(box));
    ctx.fillStyle = BOX_COLOR;
    ctx.font = "12px sans-serif";
    ctx.fillText(`box ${box.box_id}`, box.x_min + 4, box.y_min + 14);
  }

  for (const obj of scene.objects) {
    const thumb = opts.thumbnails?.get(obj.object_id);
    if (thumb) {
      ctx.globalAlpha = 1;
      ctx.drawImage(thumb, ...rectArgs(obj.bbox));
    } else {
      ctx.globalAlpha = 0.35;
      ctx.fillStyle = OBJECT_COLOR;
      ctx.fillRect(...rectArgs(obj.bbox));
    }
    ctx.globalAlpha = 1;
    ctx.lineWidth = 1;
    ctx.strokeStyle = OBJECT_COLOR;
    ctx.strokeRect(...rectArgs(obj.bbox));
    summary.drawnObjectIds.push(obj.object_id);

    if (highlight.has(obj.object_id)) {
      // pulse widens and brightens the outline; pure cosmetics
      ctx.globalAlpha = 0.6 + 0.4 * pulse;
      ctx.lineWidth = 2 + pulse;
      ctx.strokeStyle = HIGHLIGHT_COLOR;
      const [x, y, w, h] = rectArgs(obj.bbox);
      ctx.strokeRect(x - 2, y - 2, w + 4, h + 4);
      ctx.globalAlpha = 1;
      summary.highlightedObjectIds.push(obj.object_id);
    }
  }
  return summary;
}
