/** Per-tab annotator session: identity, the active work queue, and the
 * unsaved-changes guard. The queue keeps exactly the order the server
 * assigned; nothing here re-sorts it. */

export type ConfirmFn = (message: string) => boolean;

export class UISession {
  annotatorId: string;
  token: string | null;
  private queue: string[] = [];
  private cursor = -1;
  private dirty = false;

  constructor(annotatorId: string, token: string | null = null) {
    this.annotatorId = annotatorId;
    this.token = token;
  }

  get currentTarget(): string | null {
    return this.cursor >= 0 ? (this.queue[this.cursor] ?? null) : null;
  }

  get workQueue(): readonly string[] {
    return this.queue;
  }

  get hasUnsavedChanges(): boolean {
    return this.dirty;
  }

  markDirty(): void {
    this.dirty = true;
  }

  markClean(): void {
    this.dirty = false;
  }

  /** Replace the work queue with the server's assignment order. */
  setQueue(targets: string[]): void {
    this.queue = [...targets];
    this.cursor = this.queue.length > 0 ? 0 : -1;
  }

  /** Move to a target, prompting first if there is unsaved work.
   * Returns false (and stays put) when the user declines. */
  navigateTo(target: string, confirm: ConfirmFn): boolean {
    if (this.dirty && !confirm("Discard unsaved changes?")) return false;
    const idx = this.queue.indexOf(target);
    if (idx >= 0) {
      this.cursor = idx;
    } else {
      this.queue.push(target);
      this.cursor = this.queue.length - 1;
    }
    this.dirty = false;
    return true;
  }

  /** Step within the queue; delta is typically +1 or -1. */
  step(delta: number, confirm: ConfirmFn): boolean {
    const next = this.cursor + delta;
    if (next < 0 || next >= this.queue.length) return false;
    if (this.dirty && !confirm("Discard unsaved changes?")) return false;
    this.cursor = next;
    this.dirty = false;
    return true;
  }
}
