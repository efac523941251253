import type { Cell, CommandResponse, GridSnapshot } from "../src/api.js";

function rect(x0: number, y0: number, x1: number, y1: number): Cell[] {
  const cells: Cell[] = [];
  for (let x = x0; x <= x1; x += 1) {
    for (let y = y0; y <= y1; y += 1) {
      cells.push([x, y]);
    }
  }
  return cells;
}

/** Small three-room scene: red and blue on top, green below. */
export function demoSnapshot(): GridSnapshot {
  const walls: Cell[] = [];
  for (let x = 0; x < 9; x += 1) {
    walls.push([x, 0], [x, 8]);
  }
  for (let y = 0; y < 9; y += 1) {
    walls.push([0, y], [8, y]);
  }
  for (let x = 1; x < 8; x += 1) {
    if (x !== 2 && x !== 6) {
      walls.push([x, 4]);
    }
  }
  for (let y = 5; y < 8; y += 1) {
    if (y !== 6) {
      walls.push([4, y]);
    }
  }
  return {
    width: 9,
    height: 9,
    walls,
    rooms: [
      { id: "room0", color: "red", cells: rect(1, 5, 3, 7) },
      { id: "room1", color: "blue", cells: rect(5, 5, 7, 7) },
      { id: "room2", color: "green", cells: rect(1, 1, 7, 3) },
    ],
    doors: [
      { id: "door0", cells: [[2, 4]] },
      { id: "door1", cells: [[6, 4]] },
      { id: "door2", cells: [[4, 6]] },
    ],
    blocks: [{ id: "block0", color: "orange", pos: [6, 6] }],
    agent: [2, 6],
  };
}

/** Server answer for "go to the green room" from the demo snapshot. */
export function greenRoomResponse(): CommandResponse {
  return {
    level: 2,
    lifted: "agentInRegion agent0 roomIsGreen",
    grounded: {
      predicate: "agentInRegion",
      entity: "agent0",
      target_region: "room2",
    },
    plan_steps: ["south", "south", "south"],
    planning_ms: 12.5,
    score_table_top5: [
      { level: 2, reward: "agentInRegion agent0 roomIsGreen", posterior: 0.93 },
      { level: 2, reward: "agentInRegion agent0 roomIsBlue", posterior: 0.04 },
      { level: 1, reward: "agentInRegion agent0 roomIsGreen", posterior: 0.02 },
      { level: 2, reward: "blockInRegion block0 roomIsGreen", posterior: 0.006 },
      { level: 0, reward: "agentInRoom agent0 roomIsGreen", posterior: 0.004 },
    ],
    low_confidence: false,
  };
}

export function finalSnapshot(): GridSnapshot {
  const snap = demoSnapshot();
  return { ...snap, agent: [2, 3] };
}

/** fetch stub mapping /v1 routes to canned responses. */
export function mockFetch(overrides: Record<string, unknown> = {}) {
  const calls: { url: string; init?: RequestInit }[] = [];
  let stateCalls = 0;
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const respond = (status: number, body: unknown) =>
      new Response(JSON.stringify(body), {
        status,
        headers: { "content-type": "application/json" },
      });
    if (url.endsWith("/v1/sessions") && init?.method === "POST") {
      return respond(200, { id: "abc123" });
    }
    if (url.endsWith("/state")) {
      stateCalls += 1;
      if ("state" in overrides) {
        return respond(200, overrides.state);
      }
      // first fetch: starting scene; later fetches: the settled server state
      return respond(200, stateCalls === 1 ? demoSnapshot() : finalSnapshot());
    }
    if (url.endsWith("/command")) {
      if ("commandStatus" in overrides) {
        return respond(overrides.commandStatus as number, overrides.commandBody);
      }
      return respond(200, greenRoomResponse());
    }
    if (url.endsWith("/reset")) {
      return respond(200, { ok: true });
    }
    return respond(404, { error: { code: "UnknownRoute", message: url } });
  };
  return { impl, calls };
}
