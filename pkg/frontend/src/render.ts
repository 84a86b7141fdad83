/** Top-down 2D scene rendering for highway and mover frames.
 *
 * World-to-canvas mapping and entity styling are pure functions so they can
 * be unit tested; `renderFrame` only sequences canvas calls around them.
 */

import type { EntityPose, Frame, RenderMeta } from "./types.js";

export interface Viewport {
  width: number;
  height: number;
}

export interface CanvasPoint {
  x: number;
  y: number;
  scale: number; // canvas pixels per world meter
}

export const ENTITY_COLORS: Record<string, string> = {
  human: "#e8821e", // the human car/controls are always orange
  robot: "#7d4fd3", // the learning agent is purple
  mover: "#7d4fd3",
  target: "#2e9949",
};

export function entityColor(name: string): string {
  return ENTITY_COLORS[name] ?? "#9aa0a6"; // background traffic stays neutral
}

/** Map world coordinates to canvas pixels.
 *
 * Highway: x spans the track, y spans the lane band, y up.
 * Mover: the arena is centered, y up.
 */
export function worldToCanvas(
  meta: RenderMeta,
  x: number,
  y: number,
  view: Viewport,
  cameraX = 0,
): CanvasPoint {
  if (meta.kind === "highway") {
    const laneBand = meta.lane_centers.length * meta.lane_width;
    const scale = view.height / laneBand;
    const visibleMeters = view.width / scale;
    const left = cameraX - visibleMeters / 2;
    return {
      x: (x - left) * scale,
      y: view.height - y * scale,
      scale,
    };
  }
  const scale = view.width / (2 * meta.arena_halfwidth);
  return {
    x: view.width / 2 + (x - cameraX) * scale,
    y: view.height / 2 - y * scale,
    scale,
  };
}

/** Camera follows the two agent cars on highway, the mover otherwise. */
export function cameraCenter(meta: RenderMeta, frame: Frame): number {
  if (meta.kind === "highway") {
    const anchors = frame.filter((e) => e.entity === "robot" || e.entity === "human");
    if (anchors.length === 0) return 0;
    return anchors.reduce((acc, e) => acc + e.x, 0) / anchors.length;
  }
  return 0;
}

interface Ctx2D {
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(angle: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  setLineDash(segments: number[]): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
}

export function renderFrame(
  ctx: Ctx2D,
  frame: Frame,
  meta: RenderMeta,
  view: Viewport,
): void {
  ctx.clearRect(0, 0, view.width, view.height);
  const camera = cameraCenter(meta, frame);
  if (meta.kind === "highway") {
    drawLanes(ctx, meta, view, camera);
  }
  for (const pose of frame) {
    drawEntity(ctx, pose, meta, view, camera);
  }
}

function drawLanes(
  ctx: Ctx2D,
  meta: Extract<RenderMeta, { kind: "highway" }>,
  view: Viewport,
  camera: number,
): void {
  ctx.strokeStyle = "#555";
  ctx.lineWidth = 1;
  const edges = [0, ...meta.lane_centers.map((c) => c + meta.lane_width / 2)];
  for (const edge of edges) {
    const p = worldToCanvas(meta, camera, edge, view, camera);
    ctx.setLineDash(edge === 0 || edge === edges[edges.length - 1] ? [] : [8, 8]);
    ctx.beginPath();
    ctx.moveTo(0, p.y);
    ctx.lineTo(view.width, p.y);
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function drawEntity(
  ctx: Ctx2D,
  pose: EntityPose,
  meta: RenderMeta,
  view: Viewport,
  camera: number,
): void {
  const p = worldToCanvas(meta, pose.x, pose.y, view, camera);
  ctx.save();
  ctx.translate(p.x, p.y);
  ctx.rotate(-pose.heading); // canvas y points down, world y up
  ctx.fillStyle = entityColor(pose.entity);
  if (meta.kind === "highway") {
    const l = 5 * p.scale; // car_length, car_width in world meters
    const w = 2 * p.scale;
    ctx.fillRect(-l / 2, -w / 2, l, w);
  } else if (pose.entity === "target") {
    ctx.beginPath();
    ctx.arc(0, 0, 0.6 * p.scale, 0, 2 * Math.PI);
    ctx.fill();
  } else {
    ctx.beginPath();
    ctx.arc(0, 0, 1.0 * p.scale, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.restore();
}
