import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { RoiCapture } from "../src/timestamps.js";
import type { RoiDoc } from "../src/types.js";
import { fakeFetch, mount, RecordedCall } from "./helpers.js";

function roiDoc(call: RecordedCall): RoiDoc {
  const body = call.body as Omit<RoiDoc, "video_id" | "version">;
  return { video_id: "v1", ...body, version: 1 };
}

describe("RoiCapture", () => {
  let root: HTMLElement;
  let playhead: number;
  const player = { currentTimeMs: () => playhead };

  beforeEach(() => {
    document.body.replaceChildren();
    root = mount();
    playhead = 0;
  });

  function freshCapture(extraRoutes = {}) {
    const fake = fakeFetch({
      "GET /videos/v1/roi": [404, { error: "NotFoundError", detail: "no roi yet" }],
      "PUT /videos/v1/roi": (call) => [200, roiDoc(call)],
      ...extraRoutes,
    });
    const api = new ApiClient("", { annotatorId: "lead" }, fake.fetchFn);
    return { capture: new RoiCapture(root, api, "v1", player), fake };
  }

  it("captures the rounded playhead and shows it verbatim", async () => {
    const { capture } = freshCapture();
    await capture.load();
    playhead = 123_456.7;
    expect(capture.capture("start")).toBe(123_457);
    expect(root.querySelector(".roi-start .roi-value")!.textContent).toBe("123457 ms");
    expect(root.querySelector(".roi-end .roi-value")!.textContent).toBe("not set");
  });

  it("keyboard shortcut and button produce byte-identical payloads", async () => {
    // run the same scenario once clicking buttons, once pressing keys
    async function run(drive: (field: "start" | "evaluable" | "end") => void) {
      document.body.replaceChildren();
      root = mount();
      const { capture, fake } = freshCapture();
      await capture.load();
      capture.bindKeys(root);
      for (const [field, t] of [
        ["start", 30_000],
        ["evaluable", 90_000],
        ["end", 270_000],
      ] as const) {
        playhead = t;
        drive(field);
      }
      expect(await capture.save()).not.toBeNull();
      const put = fake.calls.find((c) => c.method === "PUT");
      return put!.body;
    }

    const KEY_FOR = { start: "s", evaluable: "e", end: "c" } as const;
    const viaButtons = await run((field) => {
      root
        .querySelector<HTMLButtonElement>(`.roi-${field} button`)!
        .click();
    });
    const viaKeys = await run((field) => {
      root.dispatchEvent(new KeyboardEvent("keydown", { key: KEY_FOR[field] }));
    });

    expect(viaKeys).toEqual(viaButtons);
    expect(viaKeys).toEqual({
      t_start_ms: 30_000,
      t_end_ms: 270_000,
      t_evaluable_ms: 90_000,
    });
  });

  it("prefills from an existing region of interest", async () => {
    const { capture } = freshCapture({
      "GET /videos/v1/roi": [
        200,
        { video_id: "v1", t_start_ms: 5_000, t_end_ms: 60_000, t_evaluable_ms: 20_000, version: 3 },
      ],
    });
    await capture.load();
    expect(capture.captured).toEqual({ start: 5_000, evaluable: 20_000, end: 60_000 });
    expect(root.querySelector(".roi-evaluable .roi-value")!.textContent).toBe("20000 ms");
  });

  it("refuses to save until start and end exist, without any network call", async () => {
    const { capture, fake } = freshCapture();
    await capture.load();
    playhead = 10_000;
    capture.capture("start");

    expect(await capture.save()).toBeNull();

    expect(fake.calls.filter((c) => c.method === "PUT")).toHaveLength(0);
    expect(root.querySelector(".roi-error")!.textContent).toMatch(/start and end/);
    expect(root.querySelector<HTMLButtonElement>(".save-roi")!.disabled).toBe(true);
  });

  it("shows server-side ordering rejections inline", async () => {
    const { capture } = freshCapture({
      "PUT /videos/v1/roi": [
        422,
        { error: "ValidationError", detail: "t_start_ms must be before t_end_ms" },
      ],
    });
    await capture.load();
    playhead = 90_000;
    capture.capture("start");
    playhead = 30_000;
    capture.capture("end");

    expect(await capture.save()).toBeNull();

    expect(root.querySelector(".roi-error")!.textContent).toBe(
      "t_start_ms must be before t_end_ms",
    );
  });
});
