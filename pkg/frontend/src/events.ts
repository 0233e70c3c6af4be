import { CLASS_NAMES, type ClassName, type DwellEvent, type QuadrantName } from "./types.js";

/** Structural subset of Element so click mapping is testable without a DOM. */
export interface ClassTarget {
  closest(selector: string): { getAttribute(name: string): string | null } | null;
}

/** Maps a click target to the element class of the nearest rendered rect. */
export function classOfTarget(target: ClassTarget): ClassName | null {
  const rect = target.closest("[data-class]");
  const name = rect?.getAttribute("data-class") ?? null;
  return name !== null && (CLASS_NAMES as readonly string[]).includes(name)
    ? (name as ClassName)
    : null;
}

/** Quadrant of a point in a box; points exactly on a midline count as
 *  bottom/right, matching how the server buckets grid-cell midpoints. */
export function quadrantAt(
  x: number,
  y: number,
  width: number,
  height: number,
): QuadrantName {
  const top = y < height / 2;
  const left = x < width / 2;
  if (top) {
    return left ? "top_left" : "top_right";
  }
  return left ? "bottom_left" : "bottom_right";
}

/** Emits one dwell event per tick while the pointer rests over the canvas.
 *  Time comes in from the caller so the cadence is testable. */
export class DwellTracker {
  private over = false;
  private lastMove = 0;
  private quadrant: QuadrantName | null = null;

  constructor(private readonly idleMs = 250) {}

  pointerMove(
    x: number,
    y: number,
    width: number,
    height: number,
    now: number,
  ): void {
    this.over = true;
    this.lastMove = now;
    this.quadrant = quadrantAt(x, y, width, height);
  }

  pointerLeave(): void {
    this.over = false;
    this.quadrant = null;
  }

  tick(now: number): DwellEvent | null {
    if (!this.over || this.quadrant === null || now - this.lastMove < this.idleMs) {
      return null;
    }
    return { type: "dwell", quadrant: this.quadrant, seconds: 1 };
  }
}
