/** Browser entry point: wires the trial state machine and session driver to
 * the DOM.  Trial script per trial: fixation cross, blank delay, stimulus
 * paint (latency clock starts on the paint callback), keyboard response,
 * stimulus hidden immediately on response.
 */

import { ApiClient } from "./api.js";
import { TrialMachine } from "./gating.js";
import { runSession } from "./session.js";
import type { ResponsePayload, SessionProgress, TrialPayload } from "./types.js";

const TASK_INSTRUCTIONS: Record<string, string> = {
  NAMING: "Type the name of the object, then press Enter.",
  RATING: "Rate how much the right image looks like the left (1 = not at all, 7 = exactly), using keys 1–7.",
  PREFERENCE: "Which image is a better example of the object? Press A for left, K for right.",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`failed to load ${url}`));
    img.src = url;
  });
}

/** Resolves on the frame after the stimulus is painted. */
function nextPaint(): Promise<void> {
  return new Promise((r) =>
    requestAnimationFrame(() => requestAnimationFrame(() => r())),
  );
}

class DomHost {
  constructor(private readonly root: HTMLElement) {}

  private screen(): HTMLElement {
    this.root.replaceChildren();
    const screen = el("div", "screen");
    this.root.appendChild(screen);
    return screen;
  }

  async runTrial(
    trial: TrialPayload,
    progress: SessionProgress,
  ): Promise<ResponsePayload> {
    const screen = this.screen();
    const header = el("div", "header");
    header.appendChild(
      el(
        "span",
        "progress",
        `${trial.task} — trial ${progress.trial_index + 1} of ${progress.trial_counts[trial.task]}`,
      ),
    );
    if (trial.practice) header.appendChild(el("span", "practice", "PRACTICE"));
    screen.appendChild(header);

    const stage = el("div", "stage");
    screen.appendChild(stage);
    screen.appendChild(el("p", "instructions", TASK_INSTRUCTIONS[trial.task]));
    const echo = el("div", "echo");
    screen.appendChild(echo);

    const machine = new TrialMachine(trial.task, () => performance.now());

    // Keys are captured for the whole trial; the machine drops anything
    // that arrives before stimulus onset.
    const done = new Promise<ResponsePayload>((resolve) => {
      const onKey = (ev: KeyboardEvent) => {
        if (ev.key.length === 1 || ev.key === "Enter" || ev.key === "Backspace") {
          ev.preventDefault();
        }
        const payload = machine.key(ev.key);
        if (trial.task === "NAMING") echo.textContent = machine.typedName;
        if (payload) {
          window.removeEventListener("keydown", onKey);
          stage.replaceChildren(); // stimulus disappears on response
          resolve(payload);
        }
      };
      window.addEventListener("keydown", onKey);
    });

    // Fetch images during fixation so onset isn't delayed by the network.
    const images = Promise.all(trial.image_urls.map(loadImage));
    stage.appendChild(el("div", "fixation", "+"));
    await sleep(trial.fixation_ms);
    machine.fixationDone();
    stage.replaceChildren();
    await sleep(trial.delay_ms);

    for (const img of await images) stage.appendChild(img);
    await nextPaint();
    machine.stimulusOnset();

    return done;
  }
}

async function start(root: HTMLElement): Promise<void> {
  const api = new ApiClient("");
  const form = el("form", "entry");
  const idxInput = el("input");
  idxInput.type = "number";
  idxInput.min = "0";
  idxInput.value = localStorage.getItem("visfid.participant") ?? "0";
  const label = el("label", "", "Participant index: ");
  label.appendChild(idxInput);
  form.appendChild(label);
  const button = el("button", "", "Start / resume");
  form.appendChild(button);
  root.replaceChildren(form);

  const participant: number = await new Promise((resolve) => {
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      resolve(Number(idxInput.value));
    });
  });
  localStorage.setItem("visfid.participant", String(participant));

  // Reuse the stored session for this participant so a refresh resumes at
  // the server's cursor instead of starting over.
  const sidKey = `visfid.session.${participant}`;
  let sid = localStorage.getItem(sidKey);
  if (sid) {
    try {
      await api.session(sid);
    } catch {
      sid = null;
    }
  }
  if (!sid) {
    const created = await api.createSession(participant);
    sid = created.session_id;
    localStorage.setItem(sidKey, sid);
  }
  console.info("viewport", window.innerWidth, window.innerHeight);

  await runSession(api, sid, {
    runTrial: (t, p) => new DomHost(root).runTrial(t, p),
    onComplete: () => {
      const screen = el("div", "screen");
      screen.appendChild(el("h2", "", "Session complete — thank you."));
      const link = el("a", "", "Download responses (CSV)");
      link.setAttribute("href", api.exportUrl(sid!));
      screen.appendChild(link);
      root.replaceChildren(screen);
    },
  });
}

const rootEl = document.getElementById("app");
if (rootEl) {
  start(rootEl).catch((err) => {
    rootEl.replaceChildren(
      el("pre", "error", err instanceof Error ? err.message : String(err)),
    );
  });
}
