/** App shell: identity, hash routing, and view mounting.
 *
 * Routes:
 *   #/videos                 list
 *   #/video/<id>             ROI capture + sampling plan
 *   #/frame/<id>             criteria form + polygon editor
 *   #/review/batch           anonymized batch review
 *   #/review/video/<id>      sequential per-procedure review
 */

import { ApiClient, ApiError } from "./api.js";
import { CanvasState } from "./canvas.js";
import { CriteriaForm } from "./criteria.js";
import { PolygonEditor } from "./editor.js";
import { renderBatchReview, SequentialReview } from "./review.js";
import { UISession } from "./session.js";
import { RoiCapture, PlayerLike } from "./timestamps.js";

const api = new ApiClient(localStorage.getItem("cvsannot.base") ?? "");
let session = new UISession(localStorage.getItem("cvsannot.id") ?? "");

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  text?: string,
  className?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (text !== undefined) node.textContent = text;
  if (className) node.className = className;
  return node;
}

function guardNavigation(ev: BeforeUnloadEvent): void {
  if (session.hasUnsavedChanges) ev.preventDefault();
}

function mountIdentity(root: HTMLElement): void {
  const bar = el("div", undefined, "identity-bar");
  const input = el("input");
  input.placeholder = "annotator id";
  input.value = session.annotatorId;
  const tokenInput = el("input");
  tokenInput.placeholder = "token (optional)";
  tokenInput.type = "password";
  const apply = el("button", "Sign in");
  apply.addEventListener("click", () => {
    session = new UISession(input.value.trim(), tokenInput.value.trim() || null);
    localStorage.setItem("cvsannot.id", session.annotatorId);
    api.setIdentity(
      session.token
        ? { token: session.token }
        : { annotatorId: session.annotatorId },
    );
    route();
  });
  bar.append(input, tokenInput, apply);
  root.append(bar);
}

async function viewVideos(main: HTMLElement): Promise<void> {
  const videos = await api.listVideos();
  const table = el("table", undefined, "video-table");
  for (const v of videos) {
    const row = el("tr");
    const link = el("a", v.video_id);
    link.href = `#/video/${v.video_id}`;
    const cell = el("td");
    cell.append(link);
    row.append(
      cell,
      el("td", v.status),
      el("td", `${(v.duration_ms / 60000).toFixed(1)} min`),
      el("td", v.exclusion_flags.join(", ")),
    );
    table.append(row);
  }
  main.append(el("h1", "Videos"), table);
}

async function viewVideo(main: HTMLElement, videoId: string): Promise<void> {
  const video = await api.getVideo(videoId);
  main.append(el("h1", `Video ${video.video_id} (${video.status})`));

  // the "player" is a time-addressed still viewer: exact, if unglamorous
  const viewer = el("div", undefined, "still-viewer");
  const img = el("img", undefined, "still-frame") as HTMLImageElement;
  const slider = el("input") as HTMLInputElement;
  slider.type = "range";
  slider.min = "0";
  slider.max = String(video.duration_ms);
  slider.step = "1000";
  const readout = el("span", "0 ms", "playhead-ms");
  slider.addEventListener("input", () => {
    readout.textContent = `${slider.value} ms`;
    img.src = api.streamUrl(videoId, Number(slider.value));
  });
  viewer.append(img, slider, readout);
  main.append(viewer);

  const player: PlayerLike = { currentTimeMs: () => Number(slider.value) };
  const roiRoot = el("div");
  main.append(roiRoot);
  const capture = new RoiCapture(roiRoot, api, videoId, player);
  capture.bindKeys(document);
  await capture.load();

  const sampleBtn = el("button", "Lay keyframe grid", "sample-video");
  sampleBtn.addEventListener("click", async () => {
    try {
      const plan = await api.sample(videoId, 30_000, true);
      session.setQueue(
        plan.manual_timestamps.map(
          (t) => `${videoId}-${String(t).padStart(9, "0")}`,
        ),
      );
      route();
    } catch (err) {
      if (err instanceof ApiError) alert(err.detail);
      else throw err;
    }
  });
  main.append(sampleBtn);

  try {
    const plan = await api.getPlan(videoId);
    const list = el("ol", undefined, "plan-frames");
    for (const t of plan.manual_timestamps) {
      const frameId = `${videoId}-${String(t).padStart(9, "0")}`;
      const li = el("li");
      const a = el("a", `${t} ms`);
      a.href = `#/frame/${frameId}`;
      li.append(a);
      list.append(li);
    }
    main.append(el("h2", "Manual keyframes"), list);
  } catch (err) {
    if (!(err instanceof ApiError && err.status === 404)) throw err;
  }
}

async function viewFrame(main: HTMLElement, frameId: string): Promise<void> {
  main.append(el("h1", `Frame ${frameId}`));
  const criteriaRoot = el("div");
  const editorRoot = el("div");
  main.append(criteriaRoot, editorRoot);

  const form = new CriteriaForm(criteriaRoot, api, frameId);
  await form.load();

  const state = new CanvasState();
  const editor = new PolygonEditor(editorRoot, api, state, frameId);
  editor.onDirty = () => session.markDirty();
  const frame = await api.getFrame(frameId);
  try {
    const plan = await api.getPlan(frame.video_id);
    editor.setPlanOrder(
      plan.manual_timestamps.map(
        (t) => `${frame.video_id}-${String(t).padStart(9, "0")}`,
      ),
    );
  } catch {
    // no plan, no navigation
  }
  await editor.load();

  const controls = el("div", undefined, "display-controls");
  const brightness = el("input") as HTMLInputElement;
  brightness.type = "range";
  brightness.min = "0.2";
  brightness.max = "3";
  brightness.step = "0.1";
  brightness.value = "1";
  brightness.addEventListener("input", () => {
    state.setBrightness(Number(brightness.value));
    editor.render();
  });
  const zoom = el("input") as HTMLInputElement;
  zoom.type = "range";
  zoom.min = "0.25";
  zoom.max = "8";
  zoom.step = "0.25";
  zoom.value = "1";
  zoom.addEventListener("input", () => {
    state.setZoom(Number(zoom.value));
    editor.render();
  });
  controls.append(el("span", "brightness"), brightness, el("span", "zoom"), zoom);
  main.append(controls);

  const save = el("button", "Save segmentation", "save-segmentation");
  save.addEventListener("click", async () => {
    const record = await editor.submit();
    if (record) session.markClean();
  });
  main.append(save);
}

async function viewBatch(main: HTMLElement): Promise<void> {
  main.append(el("h1", "Anonymized batch review"));
  const seed = Math.floor(Math.random() * 1_000_000);
  try {
    const batch = await api.createBatch(12, seed);
    renderBatchReview(main, batch);
  } catch (err) {
    if (err instanceof ApiError) main.append(el("p", err.detail, "form-error"));
    else throw err;
  }
}

async function viewSequential(main: HTMLElement, videoId: string): Promise<void> {
  main.append(el("h1", `Sequential review of ${videoId}`));
  const review = new SequentialReview(main, api, videoId);
  await review.load();
}

async function route(): Promise<void> {
  const main = document.querySelector<HTMLElement>("main");
  if (!main) return;
  main.replaceChildren();
  const hash = window.location.hash || "#/videos";
  const [, kind, ...rest] = hash.split("/");
  try {
    if (kind === "video" && rest[0]) await viewVideo(main, rest[0]);
    else if (kind === "frame" && rest[0]) await viewFrame(main, rest[0]);
    else if (kind === "review" && rest[0] === "batch") await viewBatch(main);
    else if (kind === "review" && rest[0] === "video" && rest[1])
      await viewSequential(main, rest[1]);
    else await viewVideos(main);
  } catch (err) {
    if (err instanceof ApiError) {
      main.append(el("p", `${err.errorType}: ${err.detail}`, "form-error"));
    } else {
      throw err;
    }
  }
}

export function start(): void {
  const root = document.body;
  mountIdentity(root);
  root.append(el("main"));
  window.addEventListener("hashchange", () => void route());
  window.addEventListener("beforeunload", guardNavigation);
  void route();
}

// only boot in a real page, never when imported by tests
if (typeof window !== "undefined" && document.readyState !== "loading") {
  if (document.querySelector("#cvsannot-app")) start();
} else if (typeof window !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => {
    if (document.querySelector("#cvsannot-app")) start();
  });
}
