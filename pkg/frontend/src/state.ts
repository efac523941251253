/**
 * View-state for the console: the latest grid snapshot, the animation queue
 * of primitive steps still to play, and the inference panel contents.
 *
 * Step application here is purely cosmetic sprite movement (the agent slides
 * one cell; a block in the way slides with it). The server state fetched
 * after the animation drains stays authoritative.
 */

import type { Cell, CommandResponse, GridSnapshot, ScoreRow } from "./api.js";

export interface InferencePanel {
  level: number;
  lifted: string;
  grounded: string;
  planningMs: number;
  top5: ScoreRow[];
  lowConfidence: boolean;
}

export interface ViewState {
  sessionId: string | null;
  snapshot: GridSnapshot | null;
  queue: string[];
  panel: InferencePanel | null;
  planner: string;
  busy: boolean;
  error: string | null;
}

export const STEP_ANIMATION_MS = 150;

export function initialState(): ViewState {
  return {
    sessionId: null,
    snapshot: null,
    queue: [],
    panel: null,
    planner: "amdp",
    busy: false,
    error: null,
  };
}

const DELTAS: Record<string, Cell> = {
  north: [0, 1],
  south: [0, -1],
  east: [1, 0],
  west: [-1, 0],
};

function shifted(cell: Cell, delta: Cell): Cell {
  return [cell[0] + delta[0], cell[1] + delta[1]];
}

function sameCell(a: Cell, b: Cell): boolean {
  return a[0] === b[0] && a[1] === b[1];
}

/** Slide the agent sprite one cell, dragging a facing block along. */
export function applyStepVisual(
  snapshot: GridSnapshot,
  action: string,
): GridSnapshot {
  const delta = DELTAS[action];
  if (!delta) {
    return snapshot;
  }
  const dest = shifted(snapshot.agent, delta);
  const blocks = snapshot.blocks.map((block) =>
    sameCell(block.pos, dest) ? { ...block, pos: shifted(block.pos, delta) } : block,
  );
  return { ...snapshot, agent: dest, blocks };
}

export function panelFromResponse(response: CommandResponse): InferencePanel {
  const target = response.grounded.target_region;
  return {
    level: response.level,
    lifted: response.lifted,
    grounded: `${response.grounded.predicate}(${response.grounded.entity}${
      target ? ", " + target : ""
    })`,
    planningMs: response.planning_ms,
    top5: response.score_table_top5,
    lowConfidence: response.low_confidence,
  };
}

export function acceptResponse(
  state: ViewState,
  response: CommandResponse,
): ViewState {
  return {
    ...state,
    panel: panelFromResponse(response),
    queue: [...response.plan_steps],
    error: null,
    busy: true,
  };
}

/** Pop one step off the queue and apply it to the displayed snapshot. */
export function tick(state: ViewState): ViewState {
  if (state.queue.length === 0 || state.snapshot === null) {
    return { ...state, busy: false };
  }
  const [head, ...rest] = state.queue;
  return {
    ...state,
    snapshot: applyStepVisual(state.snapshot, head),
    queue: rest,
    busy: rest.length > 0 || state.busy,
  };
}

export function canSubmit(state: ViewState, text: string): boolean {
  return !state.busy && state.sessionId !== null && text.trim().length > 0;
}
