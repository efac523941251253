/**
 * Typed client for the /v1 session API. All grounding and planning happens
 * server-side; this module only moves JSON.
 */

export type Cell = [number, number];

export interface RoomSnapshot {
  id: string;
  color: string;
  cells: Cell[];
}

export interface DoorSnapshot {
  id: string;
  cells: Cell[];
}

export interface BlockSnapshot {
  id: string;
  color: string;
  pos: Cell;
}

export interface GridSnapshot {
  width: number;
  height: number;
  walls: Cell[];
  rooms: RoomSnapshot[];
  doors: DoorSnapshot[];
  blocks: BlockSnapshot[];
  agent: Cell;
}

export interface ScoreRow {
  level: number;
  reward: string;
  posterior: number;
}

export interface CommandResponse {
  level: number;
  lifted: string;
  grounded: { predicate: string; entity: string; target_region: string | null };
  plan_steps: string[];
  planning_ms: number;
  score_table_top5: ScoreRow[];
  low_confidence: boolean;
}

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseOrThrow<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    const error = body && typeof body === "object" ? (body as any).error : null;
    throw new ApiError(
      error?.code ?? `HTTP${response.status}`,
      error?.message ?? response.statusText,
      response.status,
    );
  }
  return body as T;
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return `${this.base}/v1${path}`;
  }

  async createSession(env?: string): Promise<string> {
    const body = await parseOrThrow<{ id: string }>(
      await this.fetchImpl(this.url("/sessions"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(env ? { env } : {}),
      }),
    );
    return body.id;
  }

  async getState(sessionId: string): Promise<GridSnapshot> {
    return parseOrThrow<GridSnapshot>(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/state`)),
    );
  }

  async sendCommand(
    sessionId: string,
    text: string,
    planner: string,
  ): Promise<CommandResponse> {
    return parseOrThrow<CommandResponse>(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/command`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text, planner }),
      }),
    );
  }

  async reset(sessionId: string): Promise<void> {
    await parseOrThrow<{ ok: boolean }>(
      await this.fetchImpl(this.url(`/sessions/${sessionId}/reset`), {
        method: "POST",
      }),
    );
  }
}
