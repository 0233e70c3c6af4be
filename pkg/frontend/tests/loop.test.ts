import { afterEach, describe, expect, it, vi } from "vitest";

import { StudioApi } from "../src/api.js";
import {
  initialState,
  interpolateView,
  recordInteraction,
  regenerate,
  setSlider,
} from "../src/state.js";
import { CLASS_NAMES, QUADRANT_NAMES, type InteractionEvent } from "../src/types.js";

const LATENT = 8;

// Serves the documented API behavior: one SVG per z row tagged with the
// request payload, and the click/dwell folding rule used by the reducer.
function stubServer(): void {
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: string, init?: RequestInit) => {
      const body = JSON.parse((init?.body as string) ?? "{}") as Record<string, unknown>;
      if (url.endsWith("/api/generate")) {
        const z = body.z as number[];
        return ok({
          grids: [],
          svgs: [`<svg data-z="${z.join(",")}"></svg>`],
        });
      }
      if (url.endsWith("/api/interpolate")) {
        const steps = body.steps as number;
        const za = body.z_a as number[];
        const zb = body.z_b as number[];
        const svgs = [];
        for (let s = 0; s < steps; s++) {
          const t = steps === 1 ? 0 : s / (steps - 1);
          const z = za.map((a, i) => (1 - t) * a + t * (zb[i] ?? 0));
          svgs.push(`<svg data-z="${z.join(",")}"></svg>`);
        }
        return ok({ grids: [], svgs });
      }
      if (url.endsWith("/api/feedback/reduce")) {
        const events = body.events as InteractionEvent[];
        const decay = body.decay as boolean;
        const cls = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        const quad = [0.5, 0.5, 0.5, 0.5];
        events.forEach((ev, i) => {
          const scale = decay ? 0.9 ** i : 1;
          if (ev.type === "click") {
            const k = CLASS_NAMES.indexOf(ev.class);
            cls[k] = (cls[k] ?? 0.5) + 0.2 * scale;
          } else {
            const k = QUADRANT_NAMES.indexOf(ev.quadrant);
            quad[k] = (quad[k] ?? 0.5) + 0.1 * ev.seconds * scale;
          }
        });
        return ok({
          class_weights: cls.map((v) => Math.min(1, Math.max(0, v))),
          quadrant_weights: quad.map((v) => Math.min(1, Math.max(0, v))),
        });
      }
      return new Response(JSON.stringify({ error: `no such endpoint: ${url}` }), {
        status: 404,
      });
    }),
  );
}

function ok(payload: unknown): Response {
  return new Response(JSON.stringify(payload), { status: 200 });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("regenerate loop", () => {
  it("a slider change round-trips into a new rendered svg", async () => {
    stubServer();
    const api = new StudioApi();
    const s = initialState(LATENT);

    await regenerate(s, api);
    const before = s.svg;
    expect(before).toContain("data-z=\"0,0,0,0,0,0,0,0\"");

    setSlider(s, 0, 1.5);
    await regenerate(s, api);
    expect(s.svg).toContain("data-z=\"1.5,0,0,0,0,0,0,0\"");
    expect(s.svg).not.toEqual(before);
  });

  it("pushes one history entry per generation with the exact z sent", async () => {
    stubServer();
    const api = new StudioApi();
    const s = initialState(LATENT);

    await regenerate(s, api);
    setSlider(s, 2, -1);
    await regenerate(s, api);

    expect(s.history).toHaveLength(2);
    expect(s.history[0]?.z[2]).toBe(0);
    expect(s.history[1]?.z[2]).toBe(-1);
    // history snapshots must not alias live state
    setSlider(s, 2, 3);
    expect(s.history[1]?.z[2]).toBe(-1);
  });

  it("leaves state untouched when the API fails", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () =>
        new Response(JSON.stringify({ error: "nope" }), { status: 400 }),
      ),
    );
    const api = new StudioApi();
    const s = initialState(LATENT);
    s.svg = "<svg data-keep></svg>";

    await expect(regenerate(s, api)).rejects.toThrow("nope");
    expect(s.svg).toBe("<svg data-keep></svg>");
    expect(s.history).toHaveLength(0);
  });
});

describe("interaction loop", () => {
  it("a BUTTON click raises the BUTTON weight shown in the controls", async () => {
    stubServer();
    const api = new StudioApi();
    const s = initialState(LATENT);
    const before = s.feedback.class_weights[2] ?? 0;

    await recordInteraction(s, api, { type: "click", class: "BUTTON" });

    expect(s.feedback.class_weights[2]).toBeGreaterThan(before);
    expect(s.feedback.class_weights[2]).toBeCloseTo(0.7, 10);
  });

  it("weights the newest event hardest and saturates at 1", async () => {
    stubServer();
    const api = new StudioApi();
    const s = initialState(LATENT);

    for (let i = 0; i < 4; i++) {
      await recordInteraction(s, api, { type: "click", class: "BUTTON" });
    }
    // 0.5 + 0.2*(1 + .9 + .81 + .729) clamps at 1
    expect(s.feedback.class_weights[2]).toBe(1);

    await recordInteraction(s, api, { type: "click", class: "TEXT" });
    const text = s.feedback.class_weights[0] ?? 0;
    expect(text).toBeCloseTo(0.7, 10);
  });

  it("dwell ticks raise the quadrant weight", async () => {
    stubServer();
    const api = new StudioApi();
    const s = initialState(LATENT);

    await recordInteraction(s, api, {
      type: "dwell",
      quadrant: "bottom_left",
      seconds: 3,
    });
    expect(s.feedback.quadrant_weights[2]).toBeCloseTo(0.8, 10);
  });

  it("the reduced vector feeds the next generate request", async () => {
    stubServer();
    const api = new StudioApi();
    const s = initialState(LATENT);

    await recordInteraction(s, api, { type: "click", class: "BUTTON" });
    const gen = vi.spyOn(api, "generate");
    await regenerate(s, api);
    const sent = gen.mock.calls[0]?.[0];
    expect(sent?.feedback?.class_weights[2]).toBeCloseTo(0.7, 10);
  });
});

describe("interpolate view", () => {
  it("renders a strip between two history entries", async () => {
    stubServer();
    const api = new StudioApi();
    const s = initialState(LATENT);

    await regenerate(s, api);
    setSlider(s, 0, 2);
    await regenerate(s, api);

    const svgs = await interpolateView(s, api, 0, 1, 5);
    expect(svgs).toHaveLength(5);
    expect(svgs[0]).toContain("data-z=\"0,0,0,0,0,0,0,0\"");
    expect(svgs[2]).toContain("data-z=\"1,0,0,0,0,0,0,0\"");
    expect(svgs[4]).toContain("data-z=\"2,0,0,0,0,0,0,0\"");
  });

  it("rejects endpoints that are not in history", async () => {
    stubServer();
    const api = new StudioApi();
    const s = initialState(LATENT);
    await expect(interpolateView(s, api, 0, 1, 5)).rejects.toThrow(RangeError);
  });
});
