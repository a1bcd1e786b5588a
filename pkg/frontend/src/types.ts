/** Wire types mirroring the experiment server's JSON payloads. */

export type Task = "NAMING" | "RATING" | "PREFERENCE";

export interface TrialPayload {
  trial_id: string;
  task: Task;
  practice: boolean;
  object: string;
  object_type: string;
  layout: "single" | "pair";
  versions: string[];
  simp_type: string;
  simp_level: number;
  condition: string;
  fixation_ms: number;
  delay_ms: number;
  stimuli: string[];
  image_urls: string[];
}

export interface SessionProgress {
  schema: string;
  session_id: string;
  participant_index: number;
  task: Task;
  task_order: Task[];
  trial_index: number;
  trial_counts: Record<Task, number>;
  complete: boolean;
}

export interface NextTrial {
  schema: string;
  complete: boolean;
  trial: TrialPayload | null;
  progress?: SessionProgress;
}

export type ResponsePayload =
  | { name: string; latency_ms: number }
  | { rating: number; latency_ms: number }
  | { choice: "left" | "right"; latency_ms: number };
