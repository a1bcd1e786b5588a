/** Thin client for the experiment server's HTTP API.
 *
 * Submissions carry an idempotency token so a retry after a network failure
 * cannot double-record a response: the server replays the cached result for
 * a token it has already seen.
 */

import type { NextTrial, ResponsePayload, SessionProgress } from "./types.js";

export type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export function makeToken(): string {
  const g = globalThis.crypto;
  if (g && typeof g.randomUUID === "function") return g.randomUUID();
  return `tok-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn = (u, i) => fetch(u, i),
    private readonly retries = 3,
    private readonly retryDelayMs = 250,
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        detail = ((await res.json()) as { detail?: string }).detail ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  createSession(participantIndex: number, seed = 0): Promise<SessionProgress> {
    return this.json("/api/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ participant_index: participantIndex, seed }),
    });
  }

  session(sid: string): Promise<SessionProgress> {
    return this.json(`/api/v1/sessions/${sid}`);
  }

  next(sid: string): Promise<NextTrial> {
    return this.json(`/api/v1/sessions/${sid}/next`);
  }

  /** Submit a response, retrying transient network failures with one token. */
  async submit(
    sid: string,
    trialId: string,
    payload: ResponsePayload,
    token: string = makeToken(),
  ): Promise<SessionProgress> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      try {
        const result = await this.json<{ progress: SessionProgress }>(
          `/api/v1/sessions/${sid}/responses`,
          {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify({ trial_id: trialId, payload, token }),
          },
        );
        return result.progress;
      } catch (err) {
        if (err instanceof ApiError) throw err; // server verdict: don't retry
        lastError = err;
        if (attempt < this.retries) {
          await new Promise((r) => setTimeout(r, this.retryDelayMs));
        }
      }
    }
    throw lastError instanceof Error
      ? lastError
      : new Error("submission failed after retries");
  }

  exportUrl(sid: string): string {
    return `${this.baseUrl}/api/v1/sessions/${sid}/export`;
  }
}
