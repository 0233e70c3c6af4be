import type { StudioApi } from "./api.js";
import type {
  FeedbackJson,
  HistoryEntry,
  InteractionEvent,
} from "./types.js";

export const SLIDER_COUNT = 16;
export const SLIDER_MIN = -3;
export const SLIDER_MAX = 3;
export const HISTORY_LIMIT = 20;

export interface StudioState {
  z: number[];
  feedback: FeedbackJson;
  history: HistoryEntry[];
  pending: InteractionEvent[];
  svg: string | null;
}

export function neutralFeedback(): FeedbackJson {
  return {
    class_weights: [0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
    quadrant_weights: [0.5, 0.5, 0.5, 0.5],
  };
}

export function initialState(latentDim: number): StudioState {
  return {
    z: new Array<number>(latentDim).fill(0),
    feedback: neutralFeedback(),
    history: [],
    pending: [],
    svg: null,
  };
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

function cloneFeedback(fb: FeedbackJson): FeedbackJson {
  return {
    class_weights: [...fb.class_weights],
    quadrant_weights: [...fb.quadrant_weights],
  };
}

/** Slider dims are the first SLIDER_COUNT entries and clamp to [-3,3]. */
export function setSlider(state: StudioState, index: number, value: number): void {
  if (!Number.isInteger(index) || index < 0 || index >= SLIDER_COUNT) {
    throw new RangeError(`slider index ${index} out of range`);
  }
  if (!Number.isFinite(value)) {
    throw new RangeError("slider value must be finite");
  }
  state.z[index] = clamp(value, SLIDER_MIN, SLIDER_MAX);
}

/** Replaces z entries beyond the slider block from a JSON array in `text`.
 *  The array must cover exactly the remaining dims; sliders are untouched. */
export function setExtraZ(state: StudioState, text: string): void {
  const expected = state.z.length - SLIDER_COUNT;
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch {
    throw new RangeError("extra z must be a JSON array of numbers");
  }
  if (
    !Array.isArray(parsed) ||
    parsed.length !== expected ||
    !parsed.every((v) => typeof v === "number" && Number.isFinite(v))
  ) {
    throw new RangeError(`extra z must be ${expected} finite numbers`);
  }
  for (let i = 0; i < expected; i++) {
    state.z[SLIDER_COUNT + i] = parsed[i] as number;
  }
}

export function setFeedbackEntry(
  state: StudioState,
  group: "class" | "quadrant",
  index: number,
  value: number,
): void {
  const weights =
    group === "class"
      ? state.feedback.class_weights
      : state.feedback.quadrant_weights;
  if (!Number.isInteger(index) || index < 0 || index >= weights.length) {
    throw new RangeError(`${group} index ${index} out of range`);
  }
  if (!Number.isFinite(value)) {
    throw new RangeError("feedback value must be finite");
  }
  weights[index] = clamp(value, 0, 1);
}

export function pushHistory(state: StudioState, entry: HistoryEntry): void {
  state.history.push(entry);
  if (state.history.length > HISTORY_LIMIT) {
    state.history.shift();
  }
}

/** Newest event goes first so server-side recency decay weights it highest. */
export function recordEvent(state: StudioState, event: InteractionEvent): void {
  state.pending.unshift(event);
}

export function exportState(state: StudioState): string {
  return JSON.stringify(
    { z: state.z, feedback: state.feedback },
    null,
    2,
  );
}

export function importState(state: StudioState, text: string): void {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch {
    throw new RangeError("import payload must be JSON");
  }
  if (parsed === null || typeof parsed !== "object") {
    throw new RangeError("import payload must be an object with z and feedback");
  }
  const obj = parsed as { z?: unknown; feedback?: unknown };
  if (
    !Array.isArray(obj.z) ||
    obj.z.length !== state.z.length ||
    !obj.z.every((v) => typeof v === "number" && Number.isFinite(v))
  ) {
    throw new RangeError(`z must be ${state.z.length} finite numbers`);
  }
  const fb = obj.feedback as FeedbackJson | undefined;
  if (
    fb === undefined ||
    !Array.isArray(fb.class_weights) ||
    fb.class_weights.length !== 6 ||
    !Array.isArray(fb.quadrant_weights) ||
    fb.quadrant_weights.length !== 4 ||
    ![...fb.class_weights, ...fb.quadrant_weights].every(
      (v) => typeof v === "number" && v >= 0 && v <= 1,
    )
  ) {
    throw new RangeError("feedback must hold 6 class and 4 quadrant weights in [0,1]");
  }
  state.z = [...obj.z] as number[];
  state.feedback = cloneFeedback(fb);
}

/** POSTs the current (z, f), swaps in the returned SVG, records history.
 *  Throws on API failure without touching state. */
export async function regenerate(
  state: StudioState,
  api: StudioApi,
): Promise<string> {
  const z = [...state.z];
  const feedback = cloneFeedback(state.feedback);
  const res = await api.generate({ z, feedback });
  const svg = res.svgs[0];
  if (svg === undefined) {
    throw new RangeError("generate returned no svg");
  }
  state.svg = svg;
  pushHistory(state, { z, feedback, svg });
  return svg;
}

/** Appends the event, folds all pending events server-side, and replaces the
 *  feedback controls with the result; the next regenerate picks it up. */
export async function recordInteraction(
  state: StudioState,
  api: StudioApi,
  event: InteractionEvent,
): Promise<FeedbackJson> {
  recordEvent(state, event);
  const fb = await api.reduceFeedback([...state.pending], true);
  state.feedback = cloneFeedback(fb);
  return fb;
}

export async function interpolateView(
  state: StudioState,
  api: StudioApi,
  fromIndex: number,
  toIndex: number,
  steps: number,
): Promise<string[]> {
  const a = state.history[fromIndex];
  const b = state.history[toIndex];
  if (a === undefined || b === undefined) {
    throw new RangeError("both interpolation endpoints must be history entries");
  }
  const res = await api.interpolate({
    z_a: a.z,
    z_b: b.z,
    steps,
    feedback: cloneFeedback(state.feedback),
  });
  return res.svgs;
}
