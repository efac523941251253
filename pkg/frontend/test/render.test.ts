import { describe, expect, it } from "vitest";

import { Drawable, RenderError, TILE, renderGrid } from "../src/render.js";
import { demoSnapshot } from "./fixtures.js";

class RecordingContext implements Drawable {
  fillStyle: string = "";
  strokeStyle: string = "";
  lineWidth = 1;
  rects: { x: number; y: number; color: string }[] = [];
  arcs: { x: number; y: number; r: number }[] = [];

  fillRect(x: number, y: number): void {
    this.rects.push({ x, y, color: String(this.fillStyle) });
  }
  strokeRect(): void {}
  beginPath(): void {}
  arc(x: number, y: number, r: number): void {
    this.arcs.push({ x, y, r });
  }
  fill(): void {}
}

describe("renderGrid", () => {
  it("tints the three rooms with three distinct colors", () => {
    const ctx = new RecordingContext();
    renderGrid(ctx, demoSnapshot());
    const colors = new Set(ctx.rects.map((r) => r.color));
    // background + three room tints + door tint + block at least
    expect(colors.size).toBeGreaterThanOrEqual(5);
  });

  it("draws the agent glyph at the snapshot coordinates", () => {
    const ctx = new RecordingContext();
    const snap = demoSnapshot();
    renderGrid(ctx, snap);
    expect(ctx.arcs).toHaveLength(1);
    const [ax, ay] = snap.agent;
    expect(ctx.arcs[0].x).toBe(ax * TILE + TILE / 2);
    expect(ctx.arcs[0].y).toBe((snap.height - 1 - ay) * TILE + TILE / 2);
  });

  it("is deterministic for a fixed snapshot", () => {
    const a = new RecordingContext();
    const b = new RecordingContext();
    renderGrid(a, demoSnapshot());
    renderGrid(b, demoSnapshot());
    expect(a.rects).toEqual(b.rects);
    expect(a.arcs).toEqual(b.arcs);
  });

  it("rejects malformed snapshots", () => {
    const ctx = new RecordingContext();
    expect(() => renderGrid(ctx, { width: 3 })).toThrow(RenderError);
    expect(() => renderGrid(ctx, null)).toThrow(RenderError);
  });
});
