/** Polygon editor for one manual keyframe.
 *
 * Vertices are captured in screen space and converted through CanvasState
 * into image pixel coordinates immediately; everything stored or posted is
 * image-space. The palette is the frozen class table minus background, with
 * Ignore kept for unidentifiable structures. Hole mode marks the next shape
 * as a cutout back to background (fenestrated instrument jaws). Previous and
 * next navigation follows the sampling plan order so an author can sweep a
 * procedure sequentially. */

import { ApiClient, ApiError } from "./api.js";
import { CanvasState, Point } from "./canvas.js";
import { SEGMENTATION_GUIDANCE, classByIndex, paletteClasses } from "./classes.js";
import type { SegmentationDoc, ShapeIn } from "./types.js";

export class PolygonEditor {
  shapes: ShapeIn[] = [];
  current: Point[] = [];
  existing: SegmentationDoc | null = null;
  private planOrder: string[] = [];
  onDirty: () => void = () => {};

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    readonly state: CanvasState,
    readonly frameId: string,
  ) {}

  async load(): Promise<void> {
    try {
      this.existing = await this.api.getSegmentation(this.frameId);
      this.shapes = this.existing.polygons.map((p) => ({
        label: p.label,
        points: p.points.map(([x, y]) => [x, y] as Point),
        draw_order: p.draw_order,
        is_hole: p.is_hole,
      }));
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 404)) throw err;
      this.existing = null;
    }
    this.render();
  }

  setPlanOrder(frameIds: string[]): void {
    this.planOrder = [...frameIds];
  }

  neighborFrame(delta: 1 | -1): string | null {
    const idx = this.planOrder.indexOf(this.frameId);
    if (idx < 0) return null;
    return this.planOrder[idx + delta] ?? null;
  }

  /** A canvas click in screen coordinates becomes an image-space vertex. */
  handleCanvasClick(screenX: number, screenY: number): Point {
    const vertex = this.state.screenToImage([screenX, screenY]);
    this.current.push(vertex);
    this.onDirty();
    this.render();
    return vertex;
  }

  undoVertex(): void {
    this.current.pop();
    this.render();
  }

  /** Commit the in-progress ring as a shape of the active class. */
  closeShape(): ShapeIn | null {
    if (this.current.length < 3) {
      this.showError("A polygon needs at least three vertices.");
      return null;
    }
    const shape: ShapeIn = {
      label: this.state.activeClass,
      points: this.current.map(([x, y]) => [x, y] as [number, number]),
      draw_order: this.shapes.length,
      is_hole: this.state.holeMode,
    };
    this.shapes.push(shape);
    this.current = [];
    this.showError(null);
    this.render();
    return shape;
  }

  removeShape(index: number): void {
    this.shapes.splice(index, 1);
    this.onDirty();
    this.render();
  }

  async submit(draft = false): Promise<SegmentationDoc | null> {
    try {
      this.existing = await this.api.submitSegmentation(
        this.frameId,
        this.shapes,
        draft,
      );
      this.showError(null);
      this.render();
      return this.existing;
    } catch (err) {
      if (err instanceof ApiError) {
        this.showError(err.detail);
        return null;
      }
      throw err;
    }
  }

  private showError(message: string | null): void {
    let box = this.root.querySelector<HTMLElement>(".editor-error");
    if (!box) {
      box = document.createElement("p");
      box.className = "editor-error";
      this.root.append(box);
    }
    box.textContent = message ?? "";
    box.hidden = message === null;
  }

  render(): void {
    let panel = this.root.querySelector<HTMLElement>(".polygon-editor");
    if (!panel) {
      panel = document.createElement("div");
      panel.className = "polygon-editor";
      this.root.prepend(panel);
    }
    panel.replaceChildren();

    const img = document.createElement("img");
    img.className = "frame-image";
    img.src = this.api.frameImageUrl(this.frameId);
    img.style.filter = this.state.cssFilter();
    img.style.transform = `scale(${this.state.zoom})`;
    panel.append(img);

    // palette: every class except implicit background
    const palette = document.createElement("div");
    palette.className = "class-palette";
    for (const cls of paletteClasses()) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.className = `palette-${cls.name}`;
      btn.textContent = cls.label;
      btn.style.borderColor = cls.color;
      if (this.state.activeClass === cls.index) btn.classList.add("selected");
      btn.addEventListener("click", () => {
        this.state.activeClass = cls.index;
        this.render();
      });
      palette.append(btn);
    }
    const hole = document.createElement("button");
    hole.type = "button";
    hole.className = "hole-toggle";
    hole.textContent = this.state.holeMode ? "Hole mode: on" : "Hole mode: off";
    hole.addEventListener("click", () => {
      this.state.holeMode = !this.state.holeMode;
      this.render();
    });
    palette.append(hole);
    panel.append(palette);

    const list = document.createElement("ol");
    list.className = "shape-list";
    this.shapes.forEach((shape, i) => {
      const li = document.createElement("li");
      const cls =
        typeof shape.label === "number"
          ? classByIndex(shape.label).label
          : shape.label;
      li.textContent = `${cls}, ${shape.points.length} vertices${shape.is_hole ? ", hole" : ""}`;
      const del = document.createElement("button");
      del.type = "button";
      del.className = "remove-shape";
      del.textContent = "remove";
      del.addEventListener("click", () => this.removeShape(i));
      li.append(del);
      list.append(li);
    });
    panel.append(list);

    const guidance = document.createElement("aside");
    guidance.className = "segmentation-guidance";
    const ul = document.createElement("ul");
    for (const rule of SEGMENTATION_GUIDANCE) {
      const li = document.createElement("li");
      li.textContent = rule;
      ul.append(li);
    }
    guidance.append(ul);
    panel.append(guidance);

    const nav = document.createElement("div");
    nav.className = "frame-nav";
    for (const [delta, label] of [[-1, "Previous frame"], [1, "Next frame"]] as const) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.className = delta === 1 ? "nav-next" : "nav-prev";
      btn.textContent = label;
      btn.disabled = this.neighborFrame(delta) === null;
      nav.append(btn);
    }
    panel.append(nav);
  }
}
