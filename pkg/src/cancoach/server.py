"""Live drive loop behind a websocket.

One schedule, one driving seat. Every frame on the wire is a single JSON
object terminated by a newline. Outbound types: ``state`` once per tick
(``v_lead`` is omitted while the ghost is the reference), ``directive`` and
``cue`` on change, ``report`` once when the schedule completes, ``error``
in reply to anything unparseable. Inbound: ``input`` with a throttle in
[-1, 1], ``mode_cmd`` with advance/reverse.

The first client takes the driving seat; later clients watch. The loop
pauses while the seat is empty and resumes when someone takes it. The
driver's channel is backpressured so a stalled driver pauses the clock
rather than losing frames; watcher channels drop oldest-first.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
import warnings
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .analytics import build_report, report_csv_text
from .coach import FeedbackType
from .director import ModeCommand
from .drivers import ACCEL_MAX, ACCEL_MIN
from .sim import SimConfig, Simulation, Trace

logger = logging.getLogger(__name__)

WATCHER_QUEUE_LIMIT = 256
PAUSE_POLL_S = 0.02


def throttle_accel(throttle: float) -> float:
    """Map the -1..1 throttle axis onto the acceleration envelope."""
    if throttle >= 0:
        return throttle * ACCEL_MAX
    return throttle * -ACCEL_MIN


def _frame(payload: dict) -> str:
    return json.dumps(payload, separators=(",", ":")) + "\n"


def _jsonable(x: float | None) -> float | None:
    if x is None or math.isnan(x):
        return None
    return x


class _Client:
    def __init__(self, ws: WebSocket, driving: bool):
        self.ws = ws
        self.driving = driving
        self.queue: asyncio.Queue[str] = asyncio.Queue(
            maxsize=1 if driving else WATCHER_QUEUE_LIMIT
        )

    async def deliver(self, text: str) -> None:
        if self.driving:
            await self.queue.put(text)
            return
        while True:
            try:
                self.queue.put_nowait(text)
                return
            except asyncio.QueueFull:
                try:
                    self.queue.get_nowait()
                except asyncio.QueueEmpty:
                    pass

    def drain(self) -> None:
        while True:
            try:
                self.queue.get_nowait()
            except asyncio.QueueEmpty:
                return

    async def write_loop(self) -> None:
        while True:
            text = await self.queue.get()
            await self.ws.send_text(text)


class LiveSession:
    """Owns the simulation, the clients, and the 20 Hz loop task."""

    def __init__(
        self,
        config: SimConfig,
        *,
        trace_out: str | None = None,
        tick_sleep: float | None = None,
        driver_label: str = "session",
    ):
        self.sim = Simulation(config)
        self.trace_out = trace_out
        self.tick_sleep = config.dt if tick_sleep is None else tick_sleep
        self.driver_label = driver_label
        self.throttle = 0.0
        self.pending: list[ModeCommand] = []
        self.clients: list[_Client] = []
        self.driver: _Client | None = None
        self._task: asyncio.Task | None = None
        self._directive_key = None
        self._last_cue: str | None = None
        self._cached: list[str] = []  # latest directive/cue/state frames for late joiners
        self._report_frame: str | None = None

    # -- client management ---------------------------------------------------

    def attach(self, ws: WebSocket) -> _Client:
        client = _Client(ws, driving=self.driver is None)
        self.clients.append(client)
        if client.driving:
            self.driver = client
        return client

    def detach(self, client: _Client) -> None:
        if client in self.clients:
            self.clients.remove(client)
        if self.driver is client:
            self.driver = None
        client.drain()

    async def greet(self, client: _Client) -> None:
        for text in self._cached:
            await client.deliver(text)
        if self._report_frame is not None:
            await client.deliver(self._report_frame)

    def ensure_loop(self) -> None:
        if self._task is None:
            self._task = asyncio.get_running_loop().create_task(self._run())

    async def shutdown(self) -> None:
        if self._task is not None and not self._task.done():
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass

    # -- inbound -------------------------------------------------------------

    def handle_message(self, client: _Client, raw: str) -> dict | None:
        """Apply one inbound frame; returns an error payload or None."""
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError:
            return {"type": "error", "message": "frame is not valid JSON"}
        if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
            return {"type": "error", "message": "frame must be an object with a type"}
        kind = msg["type"]
        if kind == "input":
            if not client.driving:
                return {"type": "error", "message": "read-only client: no driving seat"}
            throttle = msg.get("throttle")
            if (
                isinstance(throttle, bool)
                or not isinstance(throttle, (int, float))
                or math.isnan(float(throttle))
                or not -1.0 <= float(throttle) <= 1.0
            ):
                return {"type": "error", "message": "throttle must be a number in [-1, 1]"}
            self.throttle = float(throttle)
            return None
        if kind == "mode_cmd":
            if not client.driving:
                return {"type": "error", "message": "read-only client: no driving seat"}
            command = msg.get("command")
            if command == "advance":
                self.pending.append(ModeCommand.ADVANCE)
            elif command == "reverse":
                self.pending.append(ModeCommand.REVERSE)
            else:
                return {"type": "error", "message": "mode_cmd command must be advance or reverse"}
            return None
        return {"type": "error", "message": f"unknown message type {kind!r}"}

    # -- outbound ------------------------------------------------------------

    def _state_payload(self, sample) -> dict:
        payload = {
            "type": "state",
            "t": sample.t,
            "v": sample.v,
            "s": _jsonable(sample.s),
            "tau": _jsonable(sample.tau),
            "set_point": sample.set_point,
            "mode": sample.mode,
            "feedback": sample.feedback.value,
            "cue": sample.cue.value,
        }
        if sample.feedback is not FeedbackType.GHOST:
            payload["v_lead"] = sample.v_lead
        return payload

    def _tick_frames(self) -> list[str]:
        commands, self.pending = self.pending, []
        accel = throttle_accel(self.throttle) if self.sim.driver is None else None
        sample, _events = self.sim.step(human_accel=accel, commands=commands)
        if sample is None:
            return []
        frames = []
        dkey = (sample.mode, sample.set_point, sample.feedback.value)
        if dkey != self._directive_key:
            self._directive_key = dkey
            frames.append(
                _frame(
                    {
                        "type": "directive",
                        "mode": sample.mode,
                        "set_point": sample.set_point,
                        "feedback": sample.feedback.value,
                    }
                )
            )
        if sample.cue.value != self._last_cue:
            self._last_cue = sample.cue.value
            frames.append(_frame({"type": "cue", "cue": sample.cue.value}))
        frames.append(_frame(self._state_payload(sample)))
        self._cached = frames[-3:]
        return frames

    async def _broadcast(self, text: str) -> None:
        for client in list(self.clients):
            await client.deliver(text)

    async def _run(self) -> None:
        while not self.sim.done:
            if self.driver is None:
                await asyncio.sleep(PAUSE_POLL_S)
                continue
            for text in self._tick_frames():
                await self._broadcast(text)
            # sleep(0) still yields, so inbound frames get processed every tick
            await asyncio.sleep(self.tick_sleep if self.tick_sleep > 0 else 0)
        await self._finish()

    async def _finish(self) -> None:
        trace = Trace(
            samples=self.sim.samples,
            fingerprint=self.sim.config.config_fingerprint(),
        )
        if self.trace_out:
            try:
                Path(self.trace_out).parent.mkdir(parents=True, exist_ok=True)
                trace.to_csv(self.trace_out)
            except OSError as exc:
                logger.error("cannot write session trace: %s", exc)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # velocity-matching legs are expected here
            report = build_report([(self.driver_label, trace)])
        self._report_frame = _frame(
            {
                "type": "report",
                "csv": report_csv_text(report),
                "rows": [
                    {
                        "driver": r.driver,
                        "mode": r.mode,
                        "feedback": r.feedback,
                        "count": r.tau.count,
                        "tau_mean": r.tau.mean,
                        "tau_abs_mean": r.tau.abs_mean,
                        "tau_std": r.tau.std,
                        "reduction_mean": r.reduction_mean,
                        "reduction_std": r.reduction_std,
                    }
                    for r in report.rows
                ],
                "histograms": [
                    {"driver": d, "mode": m, "bins": bins}
                    for (d, m), bins in report.histograms.items()
                ],
            }
        )
        await self._broadcast(self._report_frame)
        logger.info("schedule complete after %d samples", len(trace))


def create_app(
    config: SimConfig,
    *,
    trace_out: str | None = None,
    tick_sleep: float | None = None,
    driver_label: str = "session",
) -> FastAPI:
    session = LiveSession(
        config, trace_out=trace_out, tick_sleep=tick_sleep, driver_label=driver_label
    )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        await session.shutdown()

    app = FastAPI(lifespan=lifespan)
    app.state.session = session

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        client = session.attach(websocket)
        writer = asyncio.get_running_loop().create_task(client.write_loop())
        session.ensure_loop()
        await session.greet(client)
        try:
            while True:
                raw = await websocket.receive_text()
                reply = session.handle_message(client, raw)
                if reply is not None:
                    await client.deliver(_frame(reply))
        except WebSocketDisconnect:
            pass
        finally:
            writer.cancel()
            session.detach(client)

    return app
