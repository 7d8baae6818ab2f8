import { connect } from "./client.js";
import { CueTone } from "./audio.js";
import { keyAction } from "./input.js";
import { frame, parseFrame, ServerMsg } from "./protocol.js";
import { renderReport } from "./report.js";
import { drawScene, sceneModel } from "./scene.js";
import { applyMessage, initialSession } from "./session.js";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const hudEl = document.getElementById("hud")!;
const bannerEl = document.getElementById("banner")!;
const reportEl = document.getElementById("report")!;
const throttleEl = document.getElementById("throttle")!;

const params = new URLSearchParams(location.search);
const wsUrl = params.get("ws") ?? "ws://localhost:8000/ws";

let session = initialSession();
let throttle = 0;
let reportShown = false;

// socket events are queued and folded in on the next animation frame
const inbox: ServerMsg[] = [];

const client = connect(
  wsUrl,
  (line) => {
    const msg = parseFrame(line);
    if (msg) inbox.push(msg);
  },
  (open) => {
    session = { ...session, connection: open ? "open" : "closed" };
  }
);

const tone = new CueTone();

window.addEventListener("keydown", (e: KeyboardEvent) => {
  tone.unlock();
  const action = keyAction(e.key, throttle);
  if (!action) return;
  e.preventDefault();
  throttle = action.throttle;
  client.send(frame(action.msg));
});
window.addEventListener("click", () => tone.unlock());

function renderHud(): void {
  const model = sceneModel(session, performance.now());
  drawScene(ctx, model, canvas.width, canvas.height);
  tone.setCue(model.cue);

  bannerEl.textContent = model.banner ?? "";
  bannerEl.className = model.banner ? "banner on" : "banner";
  throttleEl.textContent = throttle.toFixed(1);

  if (model.hud) {
    const h = model.hud;
    const err = h.tauError === null ? "" : ` | err ${h.tauError} s`;
    hudEl.textContent =
      `v ${h.v} m/s | tau ${h.tau} s | target ${h.setPoint} s${err}` +
      ` | ${h.mode} (${h.feedback}) | next directive ${h.countdown} s`;
  } else {
    hudEl.textContent = "waiting for state...";
  }

  if (session.report && !reportShown) {
    reportShown = true;
    renderReport(reportEl as HTMLElement, session.report);
  }
}

function loop(): void {
  const now = performance.now();
  while (inbox.length > 0) {
    session = applyMessage(session, inbox.shift()!, now);
  }
  renderHud();
  requestAnimationFrame(loop);
}
requestAnimationFrame(loop);
