// Top-down lane view. The scene model is pure so the ghost invariant
// (no lead drawn when feedback is ghost) is assertable without a canvas.

import { SessionState, directiveCountdown, isStale } from "./session.js";
import { Cue } from "./protocol.js";

export interface HudModel {
  v: string;
  tau: string;
  setPoint: string;
  mode: string;
  feedback: string;
  tauError: string | null; // instructed legs show no error readout
  countdown: string;
}

export interface SceneModel {
  ego: { gap: 0 };
  lead: { gap: number } | null;
  cue: Cue;
  hud: HudModel | null;
  banner: string | null;
}

const fmt = (x: number | null | undefined, digits: number): string =>
  x === null || x === undefined || !isFinite(x) ? "-" : x.toFixed(digits);

export function sceneModel(st: SessionState, nowMs: number): SceneModel {
  const s = st.latest;
  let banner: string | null = null;
  if (st.connection === "closed") banner = "disconnected";
  else if (isStale(st, nowMs)) banner = "connection degraded";

  if (!s) {
    return { ego: { gap: 0 }, lead: null, cue: st.cue, hud: null, banner };
  }

  const ghost = s.feedback === "ghost";
  const lead =
    !ghost && s.v_lead !== undefined && s.s !== null ? { gap: s.s } : null;

  let tauError: string | null = null;
  if (s.feedback !== "instructed" && s.tau !== null && s.set_point !== null) {
    tauError = (s.tau - s.set_point).toFixed(2);
  }

  return {
    ego: { gap: 0 },
    lead,
    cue: st.cue,
    hud: {
      v: fmt(s.v, 1),
      tau: fmt(s.tau, 2),
      setPoint: fmt(s.set_point, 2),
      mode: s.mode,
      feedback: s.feedback,
      tauError,
      countdown: directiveCountdown(s.t).toFixed(2),
    },
    banner,
  };
}

// ---------------------------------------------------------------- painting

const LANE_RANGE_M = 130; // vertical extent of the view
const CAR_W = 26;
const CAR_H = 46;

export function drawScene(
  ctx: CanvasRenderingContext2D,
  model: SceneModel,
  width: number,
  height: number
): void {
  ctx.clearRect(0, 0, width, height);

  // road
  ctx.fillStyle = "#2c2c2e";
  ctx.fillRect(width / 2 - 60, 0, 120, height);
  ctx.strokeStyle = "#555";
  ctx.setLineDash([14, 18]);
  ctx.beginPath();
  ctx.moveTo(width / 2, 0);
  ctx.lineTo(width / 2, height);
  ctx.stroke();
  ctx.setLineDash([]);

  const yFor = (gap: number) =>
    height - 70 - (gap / LANE_RANGE_M) * (height - 110);

  if (model.lead) {
    ctx.fillStyle = "#c33";
    ctx.fillRect(
      width / 2 - CAR_W / 2,
      yFor(model.lead.gap) - CAR_H,
      CAR_W,
      CAR_H
    );
  }

  ctx.fillStyle = "#39c";
  ctx.fillRect(width / 2 - CAR_W / 2, yFor(0) - CAR_H, CAR_W, CAR_H);

  // cue arrows double as the no-audio fallback
  ctx.fillStyle = "#fb3";
  const cx = width / 2 + 80;
  const cy = yFor(0) - CAR_H / 2;
  if (model.cue === "accelerate") {
    ctx.beginPath();
    ctx.moveTo(cx, cy - 18);
    ctx.lineTo(cx - 12, cy + 6);
    ctx.lineTo(cx + 12, cy + 6);
    ctx.fill();
  } else if (model.cue === "decelerate") {
    ctx.beginPath();
    ctx.moveTo(cx, cy + 18);
    ctx.lineTo(cx - 12, cy - 6);
    ctx.lineTo(cx + 12, cy - 6);
    ctx.fill();
  }
}
