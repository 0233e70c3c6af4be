import type {
  FeedbackJson,
  GenerateRequest,
  GenerateResponse,
  InteractionEvent,
  InterpolateRequest,
  ModelInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(
  method: "GET" | "POST",
  url: string,
  body?: unknown,
): Promise<T> {
  const init: RequestInit = { method };
  if (body !== undefined) {
    init.headers = { "Content-Type": "application/json" };
    init.body = JSON.stringify(body);
  }
  const res = await fetch(url, init);
  let payload: unknown = null;
  try {
    payload = await res.json();
  } catch {
    payload = null;
  }
  if (!res.ok) {
    const msg =
      payload !== null &&
      typeof payload === "object" &&
      typeof (payload as { error?: unknown }).error === "string"
        ? (payload as { error: string }).error
        : `${method} ${url} failed with status ${res.status}`;
    throw new ApiError(msg, res.status);
  }
  if (payload === null) {
    throw new ApiError(`${method} ${url} returned a non-JSON body`, res.status);
  }
  return payload as T;
}

export class StudioApi {
  constructor(readonly baseUrl: string = "") {}

  modelInfo(): Promise<ModelInfo> {
    return request<ModelInfo>("GET", `${this.baseUrl}/api/model`);
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return request<GenerateResponse>("POST", `${this.baseUrl}/api/generate`, req);
  }

  interpolate(req: InterpolateRequest): Promise<GenerateResponse> {
    return request<GenerateResponse>(
      "POST",
      `${this.baseUrl}/api/interpolate`,
      req,
    );
  }

  reduceFeedback(
    events: InteractionEvent[],
    decay: boolean,
  ): Promise<FeedbackJson> {
    return request<FeedbackJson>("POST", `${this.baseUrl}/api/feedback/reduce`, {
      events,
      decay,
    });
  }
}

/** Runs at most one async job at a time; while one is in flight the newest
 *  scheduled job replaces any still waiting, so a burst of slider moves
 *  settles on the final value without a backlog. */
export class LatestWins {
  private running = false;
  private queued: (() => Promise<void>) | null = null;
  private onIdle: (() => void)[] = [];

  schedule(job: () => Promise<void>): void {
    this.queued = job;
    if (!this.running) {
      void this.pump();
    }
  }

  get busy(): boolean {
    return this.running;
  }

  /** Resolves once nothing is running or waiting. */
  idle(): Promise<void> {
    if (!this.running && this.queued === null) {
      return Promise.resolve();
    }
    return new Promise((resolve) => this.onIdle.push(resolve));
  }

  private async pump(): Promise<void> {
    this.running = true;
    while (this.queued !== null) {
      const job = this.queued;
      this.queued = null;
      try {
        await job();
      } catch {
        // jobs surface their own errors (toast); the queue keeps draining
      }
    }
    this.running = false;
    for (const resolve of this.onIdle.splice(0)) {
      resolve();
    }
  }
}
