/**
 * Canvas renderer for grid snapshots: rooms tinted by their color
 * attribute, doors as wooden tiles, walls dark, blocks as filled squares,
 * the agent as a circle. Layout is deterministic in the snapshot alone.
 */

import type { GridSnapshot } from "./api.js";

export class RenderError extends Error {}

export const TILE = 32;

const ROOM_TINTS: Record<string, string> = {
  red: "#e8a0a0",
  green: "#a8d8a8",
  blue: "#a0b8e8",
  yellow: "#e8e0a0",
  purple: "#c8a8e0",
};

const BLOCK_COLORS: Record<string, string> = {
  orange: "#e07820",
  yellow: "#d8c020",
  red: "#c03030",
};

const WALL_COLOR = "#3a3a42";
const DOOR_COLOR = "#b08950";
const AGENT_COLOR = "#20242c";

function roomTint(color: string): string {
  if (color in ROOM_TINTS) {
    return ROOM_TINTS[color];
  }
  // deterministic fallback tint for unanticipated room colors
  let hash = 0;
  for (const ch of color) {
    hash = (hash * 31 + ch.charCodeAt(0)) % 360;
  }
  return `hsl(${hash}, 45%, 75%)`;
}

export interface Drawable {
  fillStyle: string | CanvasGradient | CanvasPattern;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  strokeRect(x: number, y: number, w: number, h: number): void;
}

export function validateSnapshot(snapshot: unknown): GridSnapshot {
  const snap = snapshot as GridSnapshot;
  if (
    !snap ||
    typeof snap.width !== "number" ||
    typeof snap.height !== "number" ||
    !Array.isArray(snap.rooms) ||
    !Array.isArray(snap.walls) ||
    !Array.isArray(snap.blocks) ||
    !Array.isArray(snap.agent)
  ) {
    throw new RenderError("malformed grid snapshot");
  }
  return snap;
}

/** y is flipped so north (+y) points up on screen. */
function rect(ctx: Drawable, snap: GridSnapshot, x: number, y: number,
              color: string, inset = 0): void {
  ctx.fillStyle = color;
  ctx.fillRect(
    x * TILE + inset,
    (snap.height - 1 - y) * TILE + inset,
    TILE - 2 * inset,
    TILE - 2 * inset,
  );
}

export function renderGrid(ctx: Drawable, snapshot: unknown): void {
  const snap = validateSnapshot(snapshot);
  ctx.fillStyle = WALL_COLOR;
  ctx.fillRect(0, 0, snap.width * TILE, snap.height * TILE);
  for (const room of snap.rooms) {
    const tint = roomTint(room.color);
    for (const [x, y] of room.cells) {
      rect(ctx, snap, x, y, tint);
    }
  }
  for (const door of snap.doors) {
    for (const [x, y] of door.cells) {
      rect(ctx, snap, x, y, DOOR_COLOR);
    }
  }
  for (const block of snap.blocks) {
    const [x, y] = block.pos;
    rect(ctx, snap, x, y, BLOCK_COLORS[block.color] ?? "#804020", 5);
    ctx.strokeStyle = "#2a2a2a";
    ctx.lineWidth = 2;
    ctx.strokeRect(
      x * TILE + 5,
      (snap.height - 1 - y) * TILE + 5,
      TILE - 10,
      TILE - 10,
    );
  }
  const [ax, ay] = snap.agent;
  ctx.fillStyle = AGENT_COLOR;
  ctx.beginPath();
  ctx.arc(
    ax * TILE + TILE / 2,
    (snap.height - 1 - ay) * TILE + TILE / 2,
    TILE / 2 - 6,
    0,
    2 * Math.PI,
  );
  ctx.fill();
}
