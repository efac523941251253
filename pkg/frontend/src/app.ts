/**
 * DOM wiring for the console: command box, planner dropdown, canvas, and
 * the inference panel. One command is in flight at a time; submit stays
 * disabled while steps animate at a fixed tick.
 */

import { ApiClient, ApiError } from "./api.js";
import { RenderError, TILE, renderGrid } from "./render.js";
import {
  STEP_ANIMATION_MS,
  ViewState,
  acceptResponse,
  canSubmit,
  initialState,
  tick,
} from "./state.js";

export interface AppElements {
  canvas: HTMLCanvasElement;
  input: HTMLInputElement;
  submit: HTMLButtonElement;
  resetButton: HTMLButtonElement;
  plannerSelect: HTMLSelectElement;
  panel: HTMLElement;
  errorBanner: HTMLElement;
  confidenceBadge: HTMLElement;
}

export class ConsoleApp {
  state: ViewState = initialState();
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: ApiClient,
    private el: AppElements,
    private schedule: typeof setInterval = setInterval,
    private cancel: typeof clearInterval = clearInterval,
  ) {}

  async start(): Promise<void> {
    this.el.plannerSelect.value = this.state.planner;
    this.el.input.addEventListener("input", () => this.syncControls());
    this.el.plannerSelect.addEventListener("change", () => {
      this.state.planner = this.el.plannerSelect.value;
    });
    this.el.submit.addEventListener("click", () => {
      void this.submitCommand();
    });
    this.el.input.addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter") {
        void this.submitCommand();
      }
    });
    this.el.resetButton.addEventListener("click", () => {
      void this.resetSession();
    });
    try {
      this.state.sessionId = await this.api.createSession();
      this.state.snapshot = await this.api.getState(this.state.sessionId);
      this.draw();
    } catch (error) {
      this.showError(error);
    }
    this.syncControls();
  }

  syncControls(): void {
    this.el.submit.disabled = !canSubmit(this.state, this.el.input.value);
  }

  draw(): void {
    if (!this.state.snapshot) {
      return;
    }
    try {
      this.el.canvas.width = this.state.snapshot.width * TILE;
      this.el.canvas.height = this.state.snapshot.height * TILE;
      const ctx = this.el.canvas.getContext("2d");
      if (ctx) {
        renderGrid(ctx, this.state.snapshot);
      }
      this.el.errorBanner.hidden = true;
    } catch (error) {
      if (error instanceof RenderError) {
        this.showError(error);
        return;
      }
      throw error;
    }
  }

  showError(error: unknown): void {
    const message =
      error instanceof ApiError
        ? `${error.code}: ${error.message}`
        : String(error instanceof Error ? error.message : error);
    this.state.error = message;
    this.el.errorBanner.textContent = message;
    this.el.errorBanner.hidden = false;
  }

  renderPanel(): void {
    const panel = this.state.panel;
    if (!panel) {
      return;
    }
    const top = panel.top5
      .map(
        (row) =>
          `<li>L${row.level} ${row.reward} — ${(row.posterior * 100).toFixed(1)}%</li>`,
      )
      .join("");
    this.el.panel.innerHTML = `
      <dl>
        <dt>level</dt><dd data-field="level">L${panel.level}</dd>
        <dt>lifted</dt><dd data-field="lifted">${panel.lifted}</dd>
        <dt>grounded</dt><dd data-field="grounded">${panel.grounded}</dd>
        <dt>planning</dt><dd data-field="planning">${panel.planningMs.toFixed(0)} ms</dd>
      </dl>
      <ol class="top5">${top}</ol>`;
    this.el.confidenceBadge.hidden = !panel.lowConfidence;
  }

  async submitCommand(): Promise<void> {
    const text = this.el.input.value;
    if (!canSubmit(this.state, text) || !this.state.sessionId) {
      return;
    }
    this.state.busy = true;
    this.syncControls();
    try {
      const response = await this.api.sendCommand(
        this.state.sessionId,
        text,
        this.state.planner,
      );
      this.state = acceptResponse(this.state, response);
      this.renderPanel();
      this.el.errorBanner.hidden = true;
      this.animate();
    } catch (error) {
      this.state.busy = false;
      this.showError(error);
      this.syncControls();
    }
  }

  private animate(): void {
    if (this.timer !== null) {
      this.cancel(this.timer);
    }
    this.timer = this.schedule(() => {
      this.state = tick(this.state);
      this.draw();
      if (this.state.queue.length === 0) {
        if (this.timer !== null) {
          this.cancel(this.timer);
          this.timer = null;
        }
        void this.reconcile();
      }
    }, STEP_ANIMATION_MS);
  }

  /** After the queue drains, the server state is authoritative. */
  private async reconcile(): Promise<void> {
    if (this.state.sessionId) {
      try {
        this.state.snapshot = await this.api.getState(this.state.sessionId);
        this.draw();
      } catch (error) {
        this.showError(error);
      }
    }
    this.state.busy = false;
    this.syncControls();
  }

  async resetSession(): Promise<void> {
    if (!this.state.sessionId || this.state.busy) {
      return;
    }
    try {
      await this.api.reset(this.state.sessionId);
      this.state.snapshot = await this.api.getState(this.state.sessionId);
      this.state.panel = null;
      this.el.panel.innerHTML = "";
      this.el.confidenceBadge.hidden = true;
      this.draw();
    } catch (error) {
      this.showError(error);
    }
  }
}

export function mount(root: Document, api: ApiClient): ConsoleApp {
  const byId = <T extends HTMLElement>(id: string): T => {
    const node = root.getElementById(id);
    if (!node) {
      throw new Error(`missing element #${id}`);
    }
    return node as T;
  };
  const app = new ConsoleApp(api, {
    canvas: byId<HTMLCanvasElement>("grid"),
    input: byId<HTMLInputElement>("command"),
    submit: byId<HTMLButtonElement>("submit"),
    resetButton: byId<HTMLButtonElement>("reset"),
    plannerSelect: byId<HTMLSelectElement>("planner"),
    panel: byId("panel"),
    errorBanner: byId("error"),
    confidenceBadge: byId("low-confidence"),
  });
  return app;
}
