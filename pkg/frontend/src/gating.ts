/** Per-trial response state machine with stimulus-onset gating.
 *
 * The host drives phase transitions (fixation -> delay -> stimulus onset)
 * and routes raw keypresses here.  By construction no response payload can
 * exist before `stimulusOnset()` has been called: keys arriving earlier are
 * logged and dropped.  As soon as a payload is produced the machine flips to
 * "responded" and the host must hide the stimulus.
 *
 * Latency is measured with an injectable monotonic clock (performance.now
 * in the browser) from the stimulus-paint callback to the response key; for
 * naming it is the latency of the *first* printable keypress, approximating
 * a voice-key onset time.
 */

import type { ResponsePayload, Task } from "./types.js";

export type Phase = "fixation" | "delay" | "stimulus" | "responded";

export interface IgnoredKey {
  key: string;
  phase: Phase;
  at: number;
}

const PREFERENCE_KEYS: Record<string, "left" | "right"> = {
  a: "left",
  k: "right",
};

function isPrintable(key: string): boolean {
  return key.length === 1;
}

export class TrialMachine {
  readonly task: Task;
  private readonly now: () => number;
  private phase: Phase = "fixation";
  private onsetAt: number | null = null;
  private nameBuffer = "";
  private firstKeyLatency: number | null = null;
  private payload: ResponsePayload | null = null;
  readonly ignored: IgnoredKey[] = [];

  constructor(task: Task, now: () => number) {
    this.task = task;
    this.now = now;
  }

  get currentPhase(): Phase {
    return this.phase;
  }

  get response(): ResponsePayload | null {
    return this.payload;
  }

  /** Text typed so far in a naming trial (for echoing in the UI). */
  get typedName(): string {
    return this.nameBuffer;
  }

  fixationDone(): void {
    if (this.phase === "fixation") this.phase = "delay";
  }

  /** Called from the stimulus-paint callback; starts the latency clock. */
  stimulusOnset(): void {
    if (this.phase === "responded") return;
    this.phase = "stimulus";
    this.onsetAt = this.now();
  }

  /**
   * Route one keypress.  Returns the response payload when the key completes
   * the trial, else null.  Keys before stimulus onset are ignored and logged.
   */
  key(key: string): ResponsePayload | null {
    if (this.phase !== "stimulus" || this.onsetAt === null) {
      this.ignored.push({ key, phase: this.phase, at: this.now() });
      return null;
    }
    const latency = this.now() - this.onsetAt;
    switch (this.task) {
      case "RATING": {
        if (/^[1-7]$/.test(key)) {
          return this.finish({ rating: Number(key), latency_ms: latency });
        }
        return null;
      }
      case "PREFERENCE": {
        const choice = PREFERENCE_KEYS[key.toLowerCase()];
        if (choice) return this.finish({ choice, latency_ms: latency });
        return null;
      }
      case "NAMING": {
        if (key === "Enter") {
          const name = this.nameBuffer.trim();
          if (name && this.firstKeyLatency !== null) {
            return this.finish({ name, latency_ms: this.firstKeyLatency });
          }
          return null;
        }
        if (key === "Backspace") {
          this.nameBuffer = this.nameBuffer.slice(0, -1);
          return null;
        }
        if (isPrintable(key)) {
          if (this.firstKeyLatency === null) {
            // server rejects non-positive naming latencies
            this.firstKeyLatency = Math.max(latency, 0.001);
          }
          this.nameBuffer += key;
        }
        return null;
      }
    }
  }

  private finish(payload: ResponsePayload): ResponsePayload {
    this.phase = "responded";
    this.payload = payload;
    return payload;
  }
}
