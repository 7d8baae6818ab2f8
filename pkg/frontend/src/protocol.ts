// Wire protocol: one JSON object per newline-terminated frame.

export type Cue = "accelerate" | "decelerate" | "none";
export type Feedback = "instructed" | "coached" | "ghost";

export interface StateMsg {
  type: "state";
  t: number;
  v: number;
  s: number | null;
  tau: number | null;
  set_point: number | null;
  mode: string;
  feedback: Feedback;
  cue: Cue;
  v_lead?: number; // absent on ghost legs
}

export interface DirectiveMsg {
  type: "directive";
  mode: string;
  set_point: number | null;
  feedback: Feedback;
}

export interface CueMsg {
  type: "cue";
  cue: Cue;
}

export interface ReportRow {
  driver: string;
  mode: string;
  feedback: string;
  count: number;
  tau_mean: number;
  tau_abs_mean: number;
  tau_std: number;
  reduction_mean: number | null;
  reduction_std: number | null;
}

export interface ReportMsg {
  type: "report";
  csv: string;
  rows: ReportRow[];
  histograms: { driver: string; mode: string; bins: [number, number][] }[];
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMsg = StateMsg | DirectiveMsg | CueMsg | ReportMsg | ErrorMsg;

export interface InputMsg {
  type: "input";
  throttle: number;
}

export interface ModeCmdMsg {
  type: "mode_cmd";
  command: "advance" | "reverse";
}

export type ClientMsg = InputMsg | ModeCmdMsg;

const SERVER_TYPES = new Set(["state", "directive", "cue", "report", "error"]);

export function parseFrame(line: string): ServerMsg | null {
  let msg: unknown;
  try {
    msg = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const type = (msg as { type?: unknown }).type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) return null;
  return msg as ServerMsg;
}

export function frame(msg: ClientMsg): string {
  return JSON.stringify(msg) + "\n";
}
