// Client-side session state: a fold over the inbound message stream.
// The UI computes nothing the server already knows; it only remembers
// the latest of each frame kind.

import {
  Cue,
  DirectiveMsg,
  ReportMsg,
  ServerMsg,
  StateMsg,
} from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface SessionState {
  connection: Connection;
  latest: StateMsg | null;
  cue: Cue;
  directive: DirectiveMsg | null;
  report: ReportMsg | null;
  lastStateAtMs: number | null;
  lastError: string | null;
}

export function initialSession(): SessionState {
  return {
    connection: "connecting",
    latest: null,
    cue: "none",
    directive: null,
    report: null,
    lastStateAtMs: null,
    lastError: null,
  };
}

export function applyMessage(
  st: SessionState,
  msg: ServerMsg,
  nowMs: number
): SessionState {
  switch (msg.type) {
    case "state":
      // state frames carry the cue too, so a watcher that missed the
      // cue-change frame still converges
      return { ...st, latest: msg, cue: msg.cue, lastStateAtMs: nowMs };
    case "cue":
      return { ...st, cue: msg.cue };
    case "directive":
      return { ...st, directive: msg };
    case "report":
      return { ...st, report: msg };
    case "error":
      return { ...st, lastError: msg.message };
  }
}

export const STALE_MS = 500;

export function isStale(st: SessionState, nowMs: number): boolean {
  if (st.connection !== "open" || st.lastStateAtMs === null) return false;
  if (st.report !== null) return false; // completed runs go quiet on purpose
  return nowMs - st.lastStateAtMs > STALE_MS;
}

// Directives are re-evaluated on a fixed half-second grid of sim time.
export function directiveCountdown(t: number): number {
  const remainder = t % 0.5;
  return remainder === 0 ? 0.5 : 0.5 - remainder;
}
