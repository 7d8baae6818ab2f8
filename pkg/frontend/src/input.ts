// Keyboard is the pedal: arrows nudge the throttle, brackets move the
// experiment forward and back.

import { ClientMsg } from "./protocol.js";

export const THROTTLE_STEP = 0.1;

export function stepThrottle(current: number, direction: 1 | -1): number {
  // one decimal keeps repeated steps from accumulating float fuzz
  const next = Math.round((current + direction * THROTTLE_STEP) * 10) / 10;
  return Math.max(-1, Math.min(1, next));
}

export interface KeyAction {
  msg: ClientMsg;
  throttle: number;
}

export function keyAction(key: string, throttle: number): KeyAction | null {
  switch (key) {
    case "ArrowUp": {
      const next = stepThrottle(throttle, 1);
      return { msg: { type: "input", throttle: next }, throttle: next };
    }
    case "ArrowDown": {
      const next = stepThrottle(throttle, -1);
      return { msg: { type: "input", throttle: next }, throttle: next };
    }
    case "]":
      return { msg: { type: "mode_cmd", command: "advance" }, throttle };
    case "[":
      return { msg: { type: "mode_cmd", command: "reverse" }, throttle };
    default:
      return null;
  }
}
