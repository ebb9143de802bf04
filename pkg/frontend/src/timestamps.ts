/** ROI timestamp capture.
 *
 * Three moments per video: dissection start, first evaluable criterion, and
 * the end at the first clip. Each capture takes the paused playhead in
 * milliseconds; a keyboard shortcut runs the exact same handler as its
 * button, so the payload cannot differ by input method. The number is shown
 * verbatim because browser seeking is sloppy and the displayed value is the
 * one that gets saved. */

import { ApiClient, ApiError } from "./api.js";
import type { RoiDoc } from "./types.js";

export interface PlayerLike {
  /** paused playhead position in milliseconds */
  currentTimeMs(): number;
}

export type RoiField = "start" | "evaluable" | "end";

const SHORTCUTS: Record<string, RoiField> = {
  s: "start",
  e: "evaluable",
  c: "end",
};

export class RoiCapture {
  readonly captured: Record<RoiField, number | null> = {
    start: null,
    evaluable: null,
    end: null,
  };
  saved: RoiDoc | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    readonly videoId: string,
    private readonly player: PlayerLike,
  ) {}

  /** Prefill from an existing ROI; absence is fine on first visit. */
  async load(): Promise<void> {
    try {
      this.saved = await this.api.getRoi(this.videoId);
      this.captured.start = this.saved.t_start_ms;
      this.captured.end = this.saved.t_end_ms;
      this.captured.evaluable = this.saved.t_evaluable_ms;
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 404)) throw err;
    }
    this.render();
  }

  capture(field: RoiField): number {
    const t = Math.round(this.player.currentTimeMs());
    this.captured[field] = t;
    this.render();
    return t;
  }

  clear(field: RoiField): void {
    this.captured[field] = null;
    this.render();
  }

  /** Attach keyboard shortcuts; they call capture() like the buttons do. */
  bindKeys(target: EventTarget): void {
    target.addEventListener("keydown", (ev) => {
      const key = (ev as KeyboardEvent).key;
      const field = SHORTCUTS[key];
      if (field) this.capture(field);
    });
  }

  get complete(): boolean {
    return this.captured.start !== null && this.captured.end !== null;
  }

  async save(): Promise<RoiDoc | null> {
    if (!this.complete) {
      this.showError("Capture the start and end moments first.");
      return null;
    }
    try {
      this.saved = await this.api.setRoi(this.videoId, {
        t_start_ms: this.captured.start!,
        t_end_ms: this.captured.end!,
        t_evaluable_ms: this.captured.evaluable,
      });
      this.showError(null);
      this.render();
      return this.saved;
    } catch (err) {
      if (err instanceof ApiError) {
        // ordering violations and frozen-after-sampling both land here
        this.showError(err.detail);
        return null;
      }
      throw err;
    }
  }

  private showError(message: string | null): void {
    let box = this.root.querySelector<HTMLElement>(".roi-error");
    if (!box) {
      box = document.createElement("p");
      box.className = "roi-error";
      this.root.append(box);
    }
    box.textContent = message ?? "";
    box.hidden = message === null;
  }

  render(): void {
    let panel = this.root.querySelector<HTMLElement>(".roi-capture");
    if (!panel) {
      panel = document.createElement("div");
      panel.className = "roi-capture";
      this.root.prepend(panel);
    }
    panel.replaceChildren();

    const rows: [RoiField, string][] = [
      ["start", "Dissection start"],
      ["evaluable", "First criterion evaluable"],
      ["end", "First clip (end)"],
    ];
    for (const [field, label] of rows) {
      const row = document.createElement("div");
      row.className = `roi-row roi-${field}`;
      const btn = document.createElement("button");
      btn.type = "button";
      btn.textContent = `Capture ${label.toLowerCase()}`;
      btn.addEventListener("click", () => this.capture(field));
      const value = document.createElement("span");
      value.className = "roi-value";
      const t = this.captured[field];
      value.textContent = t === null ? "not set" : `${t} ms`;
      row.append(btn, value);
      panel.append(row);
    }

    const save = document.createElement("button");
    save.type = "button";
    save.className = "save-roi";
    save.textContent = "Save region of interest";
    save.disabled = !this.complete;
    save.addEventListener("click", () => void this.save());
    panel.append(save);
  }
}
