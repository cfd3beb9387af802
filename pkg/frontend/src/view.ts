// Top-down scene rendering. Drawing goes through a minimal 2D-context
// interface so tests can record the command stream without a DOM.

import { Pgm } from "./pgm";
import { GraphNode, GridMeta, Hit, NavigateResponse } from "./types";

export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Layout {
  canvasWidth: number;
  canvasHeight: number;
  scale: number; // canvas px per meter
  worldX0: number; // world coords of the canvas's bottom-left
  worldY0: number;
}

/** Fit the grid extent into the canvas, preserving aspect, y up. */
export function layoutFor(
  meta: GridMeta,
  canvasWidth: number,
  canvasHeight: number,
): Layout {
  const worldW = meta.width * meta.cell_size;
  const worldH = meta.height * meta.cell_size;
  const scale = Math.min(canvasWidth / worldW, canvasHeight / worldH);
  return {
    canvasWidth,
    canvasHeight,
    scale,
    worldX0: meta.origin[0],
    worldY0: meta.origin[1],
  };
}

export function toCanvas(layout: Layout, x: number, y: number): [number, number] {
  return [
    (x - layout.worldX0) * layout.scale,
    layout.canvasHeight - (y - layout.worldY0) * layout.scale,
  ];
}

export function drawGrid(ctx: Draw2D, layout: Layout, meta: GridMeta, pgm: Pgm): void {
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, layout.canvasWidth, layout.canvasHeight);
  ctx.fillStyle = "#b9b9b9";
  const cell = meta.cell_size * layout.scale;
  for (let gy = 0; gy < pgm.height; gy++) {
    for (let gx = 0; gx < pgm.width; gx++) {
      if (!pgm.occupied[gy * pgm.width + gx]) continue;
      const [cx, cy] = toCanvas(
        layout,
        meta.origin[0] + gx * meta.cell_size,
        meta.origin[1] + (gy + 1) * meta.cell_size,
      );
      ctx.fillRect(cx, cy, cell + 0.5, cell + 0.5);
    }
  }
}

export function drawFootprints(
  ctx: Draw2D,
  layout: Layout,
  nodes: GraphNode[],
): void {
  ctx.strokeStyle = "#4878b0";
  ctx.lineWidth = 1;
  ctx.font = "11px sans-serif";
  for (const node of nodes) {
    const [x0, y0] = toCanvas(layout, node.aabb.min[0], node.aabb.max[1]);
    const w = (node.aabb.max[0] - node.aabb.min[0]) * layout.scale;
    const h = (node.aabb.max[1] - node.aabb.min[1]) * layout.scale;
    ctx.strokeRect(x0, y0, w, h);
    ctx.fillStyle = "#4878b0";
    ctx.fillText(`${node.class} #${node.object_id}`, x0 + 2, y0 - 2);
  }
}

/** Hits render exactly as returned: rank labels follow the server order. */
export function drawHits(ctx: Draw2D, layout: Layout, hits: Hit[]): void {
  ctx.strokeStyle = "#e08020";
  ctx.lineWidth = 2.5;
  ctx.font = "12px sans-serif";
  hits.forEach((hit, rank) => {
    const [x0, y0] = toCanvas(layout, hit.aabb.min[0], hit.aabb.max[1]);
    const w = (hit.aabb.max[0] - hit.aabb.min[0]) * layout.scale;
    const h = (hit.aabb.max[1] - hit.aabb.min[1]) * layout.scale;
    ctx.strokeRect(x0, y0, w, h);
    ctx.fillStyle = "#e08020";
    ctx.fillText(`${rank + 1}: ${hit.class} ${hit.score.toFixed(2)}`, x0 + 2, y0 + 12);
  });
}

export function drawPath(
  ctx: Draw2D,
  layout: Layout,
  path: NavigateResponse,
): void {
  if (path.waypoints.length === 0) return;
  ctx.strokeStyle = "#c03030";
  ctx.lineWidth = 2;
  ctx.beginPath();
  const [sx, sy] = toCanvas(layout, path.waypoints[0][0], path.waypoints[0][1]);
  ctx.moveTo(sx, sy);
  for (const [x, y] of path.waypoints.slice(1)) {
    const [cx, cy] = toCanvas(layout, x, y);
    ctx.lineTo(cx, cy);
  }
  ctx.stroke();
  // start marker (circle) and goal marker (filled square)
  ctx.fillStyle = "#703090";
  ctx.beginPath();
  ctx.arc(sx, sy, 5, 0, Math.PI * 2);
  ctx.fill();
  const last = path.waypoints[path.waypoints.length - 1];
  const [gx, gy] = toCanvas(layout, last[0], last[1]);
  ctx.fillStyle = "#30a050";
  ctx.fillRect(gx - 5, gy - 5, 10, 10);
}

export interface SceneViewData {
  meta: GridMeta;
  pgm: Pgm;
  nodes: GraphNode[];
  hits: Hit[];
  path: NavigateResponse | null;
}

export function renderScene(ctx: Draw2D, layout: Layout, data: SceneViewData): void {
  drawGrid(ctx, layout, data.meta, data.pgm);
  drawFootprints(ctx, layout, data.nodes);
  drawHits(ctx, layout, data.hits);
  if (data.path) drawPath(ctx, layout, data.path);
}
