/** Session driver: fetches trials in server order and runs them one at a
 * time through a host callback.  All sequencing policy (task order, trial
 * order, counterbalancing) lives on the server; this loop only follows the
 * cursor, which also makes refresh-resume trivial.
 */

import { ApiClient, makeToken } from "./api.js";
import type { ResponsePayload, SessionProgress, TrialPayload } from "./types.js";

export interface TrialHost {
  /** Present one trial and resolve with the participant's response. */
  runTrial(trial: TrialPayload, progress: SessionProgress): Promise<ResponsePayload>;
  /** Called when the server reports the session complete. */
  onComplete?(): void;
}

export async function runSession(
  api: ApiClient,
  sid: string,
  host: TrialHost,
): Promise<number> {
  let completed = 0;
  for (;;) {
    const next = await api.next(sid);
    if (next.complete || next.trial === null) break;
    const payload = await host.runTrial(next.trial, next.progress!);
    await api.submit(sid, next.trial.trial_id, payload, makeToken());
    completed++;
  }
  host.onComplete?.();
  return completed;
}
