// Cue sounds: a single sustained oscillator per cue, high pitch to speed
// up, low pitch to slow down, silence inside the dead band.

import { Cue } from "./protocol.js";

export function toneForCue(cue: Cue): number | null {
  if (cue === "accelerate") return 880;
  if (cue === "decelerate") return 220;
  return null;
}

export class CueTone {
  private ctx: AudioContext | null = null;
  private osc: OscillatorNode | null = null;
  private freq: number | null = null;
  available = true;

  constructor(private makeContext: () => AudioContext = () => new AudioContext()) {}

  // browsers refuse to start audio without a user gesture
  unlock(): void {
    if (this.ctx || !this.available) return;
    try {
      this.ctx = this.makeContext();
    } catch {
      this.available = false;
    }
  }

  setCue(cue: Cue): void {
    const want = toneForCue(cue);
    if (want === this.freq) return;
    this.freq = want;
    if (!this.ctx) return;
    if (this.osc) {
      this.osc.stop();
      this.osc.disconnect();
      this.osc = null;
    }
    if (want !== null) {
      this.osc = this.ctx.createOscillator();
      this.osc.type = "sine";
      this.osc.frequency.value = want;
      this.osc.connect(this.ctx.destination);
      this.osc.start();
    }
  }
}
