// Wire types for the layoutvae inference API. Field names match the JSON
// bodies exactly; the studio never computes model math itself.

export const CLASS_NAMES = [
  "TEXT",
  "IMAGE",
  "BUTTON",
  "ICON",
  "TOOLBAR",
  "LIST_ITEM",
] as const;

export const QUADRANT_NAMES = [
  "top_left",
  "top_right",
  "bottom_left",
  "bottom_right",
] as const;

export type ClassName = (typeof CLASS_NAMES)[number];
export type QuadrantName = (typeof QUADRANT_NAMES)[number];

export interface FeedbackJson {
  class_weights: number[];
  quadrant_weights: number[];
}

export interface GridJson {
  spec: { c: number; h: number; w: number };
  cells: number[];
}

export interface ModelInfo {
  input_dim: number;
  latent_dim: number;
  feedback_dim: number;
  hidden: number[];
  recon_loss: string;
  feedback_enabled: boolean;
  deterministic_mode: boolean;
  grid: { c: number; h: number; w: number };
}

export interface GenerateRequest {
  z?: number[];
  count?: number;
  seed?: number;
  feedback?: FeedbackJson;
}

export interface GenerateResponse {
  grids: GridJson[];
  svgs: string[];
}

export interface InterpolateRequest {
  z_a: number[];
  z_b: number[];
  steps: number;
  feedback?: FeedbackJson;
}

export interface ClickEvent {
  type: "click";
  class: ClassName;
}

export interface DwellEvent {
  type: "dwell";
  quadrant: QuadrantName;
  seconds: number;
}

export type InteractionEvent = ClickEvent | DwellEvent;

export interface HistoryEntry {
  z: number[];
  feedback: FeedbackJson;
  svg: string;
}
