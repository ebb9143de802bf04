/** Reviewer views.
 *
 * Batch mode renders the server's anonymized sample: items arrive with an
 * opaque content key and no author fields at all, so nothing identifying can
 * leak into the DOM from here. Sequential mode walks one procedure's manual
 * keyframes in timestamp order with the previous and current masks side by
 * side, and posts verdicts; the server still has the last word on
 * independence, and its 403 is shown as-is. */

import { ApiClient, ApiError } from "./api.js";
import { classByIndex } from "./classes.js";
import type { BatchDoc, QueueItem, SegmentationDoc } from "./types.js";

function mark(value: boolean): string {
  return value ? "achieved" : "not achieved";
}

export function renderBatchReview(root: HTMLElement, batch: BatchDoc): void {
  let panel = root.querySelector<HTMLElement>(".batch-review");
  if (!panel) {
    panel = document.createElement("div");
    panel.className = "batch-review";
    root.append(panel);
  }
  panel.replaceChildren();

  const heading = document.createElement("h2");
  heading.textContent = `Review batch ${batch.batch_id} (${batch.items.length} items)`;
  panel.append(heading);

  const list = document.createElement("ol");
  list.className = "batch-items";
  for (const item of batch.items) {
    const li = document.createElement("li");
    li.className = `batch-item batch-item-${item.item_type}`;
    li.dataset.itemKey = item.item_key;
    if (item.item_type === "assessment") {
      li.textContent =
        `Assessment on ${item.target_id}: ` +
        `C1 ${mark(item.c1)}, C2 ${mark(item.c2)}, C3 ${mark(item.c3)}`;
    } else {
      const classes = [...new Set(item.shapes.map((s) => classByIndex(s.label).label))];
      li.textContent =
        `Segmentation on ${item.frame_id}: ${item.shapes.length} polygons` +
        (classes.length > 0 ? ` (${classes.join(", ")})` : "");
    }
    list.append(li);
  }
  panel.append(list);
}

export class SequentialReview {
  items: QueueItem[] = [];
  index = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    readonly videoId: string,
  ) {}

  async load(): Promise<void> {
    this.items = await this.api.sequentialQueue(this.videoId);
    this.index = 0;
    this.render();
  }

  get current(): QueueItem | null {
    return this.items[this.index] ?? null;
  }

  step(delta: number): boolean {
    const next = this.index + delta;
    if (next < 0 || next >= this.items.length) return false;
    this.index = next;
    this.render();
    return true;
  }

  async verdict(approve: boolean, comment = ""): Promise<SegmentationDoc | null> {
    const item = this.current;
    if (!item) return null;
    try {
      const record = await this.api.reviewSegmentation(
        `seg-${item.frame_id}`,
        approve,
        comment,
      );
      item.segmentation_status = record.status;
      this.showError(null);
      this.render();
      return record;
    } catch (err) {
      if (err instanceof ApiError) {
        this.showError(err.detail);
        return null;
      }
      throw err;
    }
  }

  private showError(message: string | null): void {
    let box = this.root.querySelector<HTMLElement>(".review-error");
    if (!box) {
      box = document.createElement("p");
      box.className = "review-error";
      this.root.append(box);
    }
    box.textContent = message ?? "";
    box.hidden = message === null;
  }

  render(): void {
    let panel = this.root.querySelector<HTMLElement>(".sequential-review");
    if (!panel) {
      panel = document.createElement("div");
      panel.className = "sequential-review";
      this.root.prepend(panel);
    }
    panel.replaceChildren();

    const item = this.current;
    if (!item) {
      panel.textContent = "Queue is empty.";
      return;
    }

    const pos = document.createElement("p");
    pos.className = "queue-position";
    pos.textContent =
      `Frame ${item.position + 1} of ${item.total}, ` +
      `t = ${item.timestamp_ms} ms, ` +
      `${item.n_assessments} assessments, ` +
      `segmentation ${item.segmentation_status ?? "missing"}`;
    panel.append(pos);

    const strip = document.createElement("div");
    strip.className = "mask-strip";
    const prev = this.items[this.index - 1];
    if (prev) {
      const img = document.createElement("img");
      img.className = "mask-previous";
      img.src = this.api.maskUrl(prev.frame_id);
      strip.append(img);
    }
    const cur = document.createElement("img");
    cur.className = "mask-current";
    cur.src = this.api.maskUrl(item.frame_id);
    strip.append(cur);
    panel.append(strip);

    const actions = document.createElement("div");
    actions.className = "verdict-actions";
    const canVerdict =
      !item.self_authored &&
      (item.segmentation_status === "submitted" ||
        item.segmentation_status === "in_review");
    for (const [approve, label, cls] of [
      [true, "Approve", "verdict-approve"],
      [false, "Request changes", "verdict-changes"],
    ] as const) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.className = cls;
      btn.textContent = label;
      btn.disabled = !canVerdict;
      btn.addEventListener("click", () => void this.verdict(approve));
      actions.append(btn);
    }
    if (item.self_authored) {
      const note = document.createElement("p");
      note.className = "self-authored-note";
      note.textContent = "You authored this segmentation; verdicts are disabled.";
      actions.append(note);
    }
    panel.append(actions);

    const nav = document.createElement("div");
    nav.className = "queue-nav";
    for (const [delta, label, cls] of [
      [-1, "Previous", "queue-prev"],
      [1, "Next", "queue-next"],
    ] as const) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.className = cls;
      btn.textContent = label;
      btn.disabled = this.index + delta < 0 || this.index + delta >= this.items.length;
      btn.addEventListener("click", () => this.step(delta));
      nav.append(btn);
    }
    panel.append(nav);
  }
}
