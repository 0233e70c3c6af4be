import { LatestWins, StudioApi } from "./api.js";
import { DwellTracker, classOfTarget } from "./events.js";
import {
  SLIDER_COUNT,
  SLIDER_MAX,
  SLIDER_MIN,
  type StudioState,
  exportState,
  importState,
  initialState,
  interpolateView,
  recordInteraction,
  regenerate,
  setFeedbackEntry,
  setSlider,
  setExtraZ,
} from "./state.js";
import { CLASS_NAMES, QUADRANT_NAMES, type InteractionEvent } from "./types.js";

const DWELL_TICK_MS = 1000;

const api = new StudioApi("");
const queue = new LatestWins();
const dwell = new DwellTracker();

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing #${id}`);
  }
  return el as T;
}

function toast(message: string): void {
  const box = byId<HTMLDivElement>("toast");
  box.textContent = message;
  box.classList.add("show");
  window.setTimeout(() => box.classList.remove("show"), 4000);
}

function scheduleRegenerate(state: StudioState): void {
  queue.schedule(async () => {
    try {
      await regenerate(state, api);
      byId<HTMLDivElement>("canvas").innerHTML = state.svg ?? "";
      renderHistory(state);
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err));
    }
  });
}

function sliderRow(state: StudioState, i: number): HTMLLabelElement {
  const row = document.createElement("label");
  row.className = "slider-row";
  const name = document.createElement("span");
  name.textContent = `z${i}`;
  const value = document.createElement("span");
  value.className = "value";
  value.textContent = "0.00";
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(SLIDER_MIN);
  input.max = String(SLIDER_MAX);
  input.step = "0.01";
  input.value = "0";
  input.dataset.dim = String(i);
  input.addEventListener("input", () => {
    const v = Number(input.value);
    setSlider(state, i, v);
    value.textContent = v.toFixed(2);
    scheduleRegenerate(state);
  });
  row.append(name, input, value);
  return row;
}

function feedbackInput(
  state: StudioState,
  group: "class" | "quadrant",
  i: number,
  label: string,
): HTMLLabelElement {
  const row = document.createElement("label");
  row.className = "feedback-row";
  const name = document.createElement("span");
  name.textContent = label.toLowerCase().replace("_", " ");
  const input = document.createElement("input");
  input.type = "number";
  input.min = "0";
  input.max = "1";
  input.step = "0.05";
  input.dataset.group = group;
  input.dataset.index = String(i);
  input.value = "0.5";
  input.addEventListener("change", () => {
    const v = Number(input.value);
    if (!Number.isFinite(v)) {
      input.value = "0.5";
      return;
    }
    setFeedbackEntry(state, group, i, v);
    refreshFeedbackControls(state);
    scheduleRegenerate(state);
  });
  row.append(name, input);
  return row;
}

function refreshFeedbackControls(state: StudioState): void {
  const inputs = document.querySelectorAll<HTMLInputElement>(
    "#feedback input[data-group]",
  );
  for (const input of inputs) {
    const group = input.dataset.group as "class" | "quadrant";
    const i = Number(input.dataset.index);
    const weights =
      group === "class"
        ? state.feedback.class_weights
        : state.feedback.quadrant_weights;
    input.value = (weights[i] ?? 0.5).toFixed(2);
  }
}

function refreshSliders(state: StudioState): void {
  const inputs = document.querySelectorAll<HTMLInputElement>(
    "#sliders input[data-dim]",
  );
  for (const input of inputs) {
    const i = Number(input.dataset.dim);
    const v = state.z[i] ?? 0;
    input.value = String(v);
    const label = input.parentElement?.querySelector(".value");
    if (label) {
      label.textContent = v.toFixed(2);
    }
  }
  const extra = byId<HTMLTextAreaElement>("extra-z");
  extra.value = JSON.stringify(state.z.slice(SLIDER_COUNT));
}

const selected: number[] = [];

function renderHistory(state: StudioState): void {
  const strip = byId<HTMLDivElement>("history");
  strip.innerHTML = "";
  state.history.forEach((entry, i) => {
    const cell = document.createElement("button");
    cell.className = "history-cell" + (selected.includes(i) ? " selected" : "");
    cell.title = `generation ${i}`;
    cell.innerHTML = entry.svg;
    cell.addEventListener("click", () => {
      if (selected.includes(i)) {
        selected.splice(selected.indexOf(i), 1);
      } else {
        selected.push(i);
        if (selected.length > 2) {
          selected.shift();
        }
      }
      renderHistory(state);
    });
    strip.appendChild(cell);
  });
}

async function handleInteraction(
  state: StudioState,
  event: InteractionEvent,
): Promise<void> {
  try {
    await recordInteraction(state, api, event);
    refreshFeedbackControls(state);
    scheduleRegenerate(state);
  } catch (err) {
    toast(err instanceof Error ? err.message : String(err));
  }
}

function wireCanvas(state: StudioState): void {
  const canvas = byId<HTMLDivElement>("canvas");
  canvas.addEventListener("click", (ev) => {
    const cls = classOfTarget(ev.target as Element);
    if (cls !== null) {
      void handleInteraction(state, { type: "click", class: cls });
    }
  });
  canvas.addEventListener("pointermove", (ev) => {
    const box = canvas.getBoundingClientRect();
    dwell.pointerMove(
      ev.clientX - box.left,
      ev.clientY - box.top,
      box.width,
      box.height,
      performance.now(),
    );
  });
  canvas.addEventListener("pointerleave", () => dwell.pointerLeave());
  window.setInterval(() => {
    const event = dwell.tick(performance.now());
    if (event !== null) {
      void handleInteraction(state, event);
    }
  }, DWELL_TICK_MS);
}

function wireInterpolate(state: StudioState): void {
  byId<HTMLButtonElement>("interpolate").addEventListener("click", () => {
    const [a, b] = selected;
    if (a === undefined || b === undefined) {
      toast("select two history entries first");
      return;
    }
    const steps = Number(byId<HTMLInputElement>("steps").value) || 5;
    void interpolateView(state, api, a, b, steps)
      .then((svgs) => {
        const strip = byId<HTMLDivElement>("interp-strip");
        strip.innerHTML = "";
        for (const svg of svgs) {
          const cell = document.createElement("div");
          cell.className = "history-cell";
          cell.innerHTML = svg;
          strip.appendChild(cell);
        }
      })
      .catch((err: unknown) =>
        toast(err instanceof Error ? err.message : String(err)),
      );
  });
}

function wireIo(state: StudioState): void {
  const box = byId<HTMLTextAreaElement>("io");
  byId<HTMLButtonElement>("export").addEventListener("click", () => {
    box.value = exportState(state);
  });
  byId<HTMLButtonElement>("import").addEventListener("click", () => {
    try {
      importState(state, box.value);
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err));
      return;
    }
    refreshSliders(state);
    refreshFeedbackControls(state);
    scheduleRegenerate(state);
  });
}

async function boot(): Promise<void> {
  const info = await api.modelInfo();
  const state = initialState(info.latent_dim);

  const sliders = byId<HTMLDivElement>("sliders");
  for (let i = 0; i < Math.min(SLIDER_COUNT, info.latent_dim); i++) {
    sliders.appendChild(sliderRow(state, i));
  }
  byId<HTMLButtonElement>("apply-extra-z").addEventListener("click", () => {
    try {
      setExtraZ(state, byId<HTMLTextAreaElement>("extra-z").value);
      scheduleRegenerate(state);
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err));
    }
  });

  const feedback = byId<HTMLDivElement>("feedback");
  CLASS_NAMES.forEach((name, i) => {
    feedback.appendChild(feedbackInput(state, "class", i, name));
  });
  QUADRANT_NAMES.forEach((name, i) => {
    feedback.appendChild(feedbackInput(state, "quadrant", i, name));
  });

  refreshSliders(state);
  wireCanvas(state);
  wireInterpolate(state);
  wireIo(state);
  byId<HTMLButtonElement>("regenerate").addEventListener("click", () =>
    scheduleRegenerate(state),
  );
  scheduleRegenerate(state);
}

void boot().catch((err: unknown) => {
  toast(err instanceof Error ? err.message : String(err));
});
