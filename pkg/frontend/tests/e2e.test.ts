/** End-to-end: scripted session against a real experiment server.
 *
 * Spawns the Python server over a freshly generated 36-object corpus, runs a
 * complete scripted session (naming -> rating -> preference) through the
 * same ApiClient / runSession / TrialMachine code paths the browser uses,
 * then feeds the exported CSV plus a pipeline run into the stats CLI and
 * requires a clean ingest (exit 0).
 */

import { ChildProcess, execFile, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { TrialMachine } from "../src/gating.js";
import { runSession } from "../src/session.js";
import type { ResponsePayload, Task, TrialPayload } from "../src/types.js";

const execFileP = promisify(execFile);
const PKG_ROOT = join(__dirname, "..", "..");
const PYTHON_ENV = { ...process.env, PYTHONPATH: join(PKG_ROOT, "src") };
const PORT = 8123 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let work: string;
let server: ChildProcess;

function py(args: string[], timeout = 400_000) {
  return execFileP("python3", ["-m", "visfid.cli", ...args], {
    cwd: work,
    env: PYTHON_ENV,
    timeout,
  });
}

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${BASE}/api/v1/export`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("server did not come up");
}

/** Deterministic pseudo-random stream for scripted responses. */
function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

beforeAll(async () => {
  work = mkdtempSync(join(tmpdir(), "visfid-e2e-"));
  await py(["make-corpus", "corpus", "--n-objects", "36", "--budget", "300"]);
  server = spawn(
    "python3",
    [
      "-m",
      "visfid.cli",
      "serve",
      join(work, "corpus", "manifest.yaml"),
      "--store-dir",
      join(work, "store"),
      "--port",
      String(PORT),
    ],
    { cwd: work, env: PYTHON_ENV, stdio: "ignore" },
  );
  await waitForServer();
}, 120_000);

afterAll(() => {
  server?.kill();
});

describe("scripted browser session", () => {
  const taskSequence: Task[] = [];
  let exportText = "";

  it(
    "completes naming, rating, preference in order over HTTP",
    async () => {
      const api = new ApiClient(BASE);
      const created = await api.createSession(7, 0);
      expect(created.task_order).toEqual(["NAMING", "RATING", "PREFERENCE"]);

      const rand = lcg(42);
      const host = {
        async runTrial(trial: TrialPayload): Promise<ResponsePayload> {
          taskSequence.push(trial.task);
          let t = 0;
          const machine = new TrialMachine(trial.task, () => t);
          // keys during fixation must never reach the payload
          expect(machine.key("5")).toBeNull();
          expect(machine.key("a")).toBeNull();
          machine.fixationDone();
          machine.stimulusOnset();
          t += 300 + Math.floor(rand() * 900);
          let payload: ResponsePayload | null = null;
          if (trial.task === "NAMING") {
            for (const ch of trial.object) {
              machine.key(ch);
              t += 40;
            }
            payload = machine.key("Enter");
          } else if (trial.task === "RATING") {
            const base = { 0: 7, 50: 5, 80: 3 }[trial.simp_level] ?? 4;
            const jitter = Math.floor(rand() * 3) - 1;
            const digit = Math.min(7, Math.max(1, base + jitter));
            payload = machine.key(String(digit));
          } else {
            payload = machine.key(rand() < 0.5 ? "a" : "k");
          }
          expect(payload).not.toBeNull();
          expect(machine.ignored).toHaveLength(2);
          return payload!;
        },
      };
      const completed = await runSession(api, created.session_id, host);

      // 36 + 8 practice naming, 144 + 4 rating, 72 + 4 preference
      expect(completed).toBe(268);
      const blocks = taskSequence.filter((t, i) => taskSequence[i - 1] !== t);
      expect(blocks).toEqual(["NAMING", "RATING", "PREFERENCE"]);

      const res = await fetch(api.exportUrl(created.session_id));
      expect(res.ok).toBe(true);
      exportText = await res.text();
    },
    180_000,
  );

  it("exports 36 + 144 + 72 rows, practice excluded", () => {
    const lines = exportText.trim().split("\n");
    const header = lines[0].split(",");
    const taskCol = header.indexOf("task");
    expect(taskCol).toBeGreaterThanOrEqual(0);
    const counts: Record<string, number> = {};
    for (const line of lines.slice(1)) {
      const task = line.split(",")[taskCol];
      counts[task] = (counts[task] ?? 0) + 1;
    }
    expect(counts).toEqual({ NAMING: 36, RATING: 144, PREFERENCE: 72 });
  });

  it(
    "stats CLI ingests the export with zero join errors",
    async () => {
      writeFileSync(join(work, "human.csv"), exportText);
      await py([
        "pipeline",
        join(work, "corpus", "manifest.yaml"),
        "--out-dir",
        join(work, "out"),
        "--samples",
        "1500",
        "--no-images",
        "--workers",
        "4",
      ]);
      const { stdout } = await py([
        "stats",
        join(work, "out", "measures.csv"),
        join(work, "out", "predictions.csv"),
        join(work, "human.csv"),
        "--report",
        join(work, "report.txt"),
      ]);
      expect(stdout).toContain("metro_mn");
      expect(stdout).toContain("ANOVA summary");
    },
    450_000,
  );

  it("serves the built UI bundle and a stimulus image", async () => {
    const page = await fetch(`${BASE}/`);
    expect(page.ok).toBe(true);
    expect(await page.text()).toContain('<script src="/app.js">');
    const js = await fetch(`${BASE}/app.js`);
    expect(js.ok).toBe(true);

    const manifest = await import("node:fs/promises").then((fs) =>
      fs.readFile(join(work, "corpus", "manifest.yaml"), "utf-8"),
    );
    const firstObject = manifest.match(/name:\s*(\w+)/)?.[1];
    expect(firstObject).toBeTruthy();
    const img = await fetch(`${BASE}/stimuli/${firstObject}_s.png`);
    expect(img.ok).toBe(true);
    expect(img.headers.get("content-type")).toBe("image/png");
  }, 60_000);
});
