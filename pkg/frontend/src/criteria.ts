/** Criteria assessment form.
 *
 * Three binary toggles, each rendered beside the full checklist text for its
 * criterion. Submission is atomic: until every toggle has an explicit yes or
 * no, the submit button stays disabled and submit() refuses to touch the
 * network. Overall CVS is never entered here; the server derives it. */

import { ApiClient, ApiError } from "./api.js";
import type { AssessmentDoc, ChecklistDoc, FrameInfo } from "./types.js";

export type CriterionKey = "c1" | "c2" | "c3";

const KEYS: readonly CriterionKey[] = ["c1", "c2", "c3"];

export class CriteriaForm {
  readonly values: Record<CriterionKey, boolean | null> = {
    c1: null,
    c2: null,
    c3: null,
  };
  comment = "";
  saved: AssessmentDoc | null = null;
  private checklist: ChecklistDoc | null = null;
  private frame: FrameInfo | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    readonly frameId: string,
  ) {}

  async load(): Promise<void> {
    this.checklist = await this.api.checklist();
    this.frame = await this.api.getFrame(this.frameId);
    this.render();
  }

  get complete(): boolean {
    return KEYS.every((k) => this.values[k] !== null);
  }

  setCriterion(key: CriterionKey, value: boolean): void {
    this.values[key] = value;
    this.render();
  }

  /** URL that opens the source video at this frame's moment. */
  videoLink(): string | null {
    if (!this.frame) return null;
    return this.api.streamUrl(this.frame.video_id, this.frame.timestamp_ms);
  }

  /** Posts all three values in one request. Returns null without any
   * network traffic while the form is incomplete. */
  async submit(): Promise<AssessmentDoc | null> {
    if (!this.complete) {
      this.showError("All three criteria need an explicit yes or no.");
      return null;
    }
    try {
      this.saved = await this.api.submitAssessment(this.frameId, {
        c1: this.values.c1!,
        c2: this.values.c2!,
        c3: this.values.c3!,
        comment: this.comment,
      });
      this.showError(null);
      this.render();
      return this.saved;
    } catch (err) {
      if (err instanceof ApiError) {
        this.showError(err.detail);
        return null;
      }
      throw err;
    }
  }

  private showError(message: string | null): void {
    let box = this.root.querySelector<HTMLElement>(".form-error");
    if (!box) {
      box = document.createElement("p");
      box.className = "form-error";
      this.root.append(box);
    }
    box.textContent = message ?? "";
    box.hidden = message === null;
  }

  render(): void {
    const doc = this.checklist;
    if (!doc) return;
    let form = this.root.querySelector<HTMLElement>(".criteria-form");
    if (!form) {
      form = document.createElement("div");
      form.className = "criteria-form";
      this.root.prepend(form);
    }
    form.replaceChildren();

    const link = this.videoLink();
    if (link) {
      const a = document.createElement("a");
      a.className = "open-video";
      a.href = link;
      a.textContent = `Open video at ${(this.frame!.timestamp_ms / 1000).toFixed(3)} s`;
      form.append(a);
    }

    for (const criterion of doc.criteria) {
      const row = document.createElement("section");
      row.className = `criterion criterion-${criterion.key}`;
      const text = document.createElement("div");
      text.className = "criterion-text";
      text.innerHTML =
        `<h3>${criterion.title}</h3>` +
        `<p class="definition">${criterion.definition}</p>` +
        `<p class="achieved">Achieved: ${criterion.achieved}</p>` +
        `<p class="not-achieved">Not achieved: ${criterion.not_achieved}</p>`;
      row.append(text);

      for (const value of [true, false]) {
        const btn = document.createElement("button");
        btn.type = "button";
        btn.className = value ? "toggle-yes" : "toggle-no";
        btn.textContent = value ? "Achieved" : "Not achieved";
        const key = criterion.key as CriterionKey;
        if (this.values[key] === value) btn.classList.add("selected");
        btn.addEventListener("click", () => this.setCriterion(key, value));
        row.append(btn);
      }
      form.append(row);
    }

    const submit = document.createElement("button");
    submit.type = "button";
    submit.className = "submit-assessment";
    submit.textContent = this.saved ? "Update assessment" : "Submit assessment";
    submit.disabled = !this.complete;
    submit.addEventListener("click", () => void this.submit());
    form.append(submit);

    if (this.saved) {
      const note = document.createElement("p");
      note.className = "saved-note";
      note.textContent = `Saved version ${this.saved.version}.`;
      form.append(note);
    }
  }
}
