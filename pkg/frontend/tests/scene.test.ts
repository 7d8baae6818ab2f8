import { describe, expect, it } from "vitest";

import { StateMsg } from "../src/protocol.js";
import { sceneModel } from "../src/scene.js";
import { applyMessage, initialSession, SessionState } from "../src/session.js";

function sessionWith(over: Partial<StateMsg>): SessionState {
  const base: StateMsg = {
    type: "state",
    t: 1.0,
    v: 29.0,
    s: 65.0,
    tau: 2.24,
    set_point: 2.25,
    mode: "leg",
    feedback: "coached",
    cue: "none",
    v_lead: 29.0,
  };
  const st = { ...initialSession(), connection: "open" as const };
  return applyMessage(st, { ...base, ...over }, 0);
}

describe("ghost invisibility", () => {
  it("never draws a lead during ghost legs, whatever the stream says", () => {
    // sweep a scripted stream across gaps and cues; ghost frames carry no
    // v_lead on the wire, but the model must hold even if one sneaks in
    for (let gap = 5; gap <= 125; gap += 10) {
      const honest = sessionWith({ feedback: "ghost", s: gap, v_lead: undefined });
      expect(sceneModel(honest, 0).lead).toBeNull();
      const sneaky = sessionWith({ feedback: "ghost", s: gap, v_lead: 28.0 });
      expect(sceneModel(sneaky, 0).lead).toBeNull();
    }
  });

  it("draws the lead at the reported gap otherwise", () => {
    const model = sceneModel(sessionWith({ s: 65.0 }), 0);
    expect(model.lead).toEqual({ gap: 65.0 });
  });
});

describe("hud", () => {
  it("shows no tau-error readout during instructed legs", () => {
    const instructed = sceneModel(sessionWith({ feedback: "instructed" }), 0);
    expect(instructed.hud?.tauError).toBeNull();
    const coached = sceneModel(sessionWith({ feedback: "coached" }), 0);
    expect(coached.hud?.tauError).toBe("-0.01");
  });

  it("dashes out an undefined tau instead of printing NaN", () => {
    const model = sceneModel(sessionWith({ tau: null }), 0);
    expect(model.hud?.tau).toBe("-");
    expect(model.hud?.tauError).toBeNull();
  });

  it("raises the degraded banner on a stale stream", () => {
    const st = sessionWith({});
    expect(sceneModel(st, 400).banner).toBeNull();
    expect(sceneModel(st, 600).banner).toBe("connection degraded");
  });
});
