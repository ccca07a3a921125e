"""WebSocket gaze streaming.

The server replays a frame source through the pipeline and broadcasts each
FrameResult as one JSON text message. On connect a client receives a hello
with the screen geometry and calibration state. Clients drive the two-cross
calibration: after dwelling on both crosses they send
{"cmd": "calibrate", "crosses": [{x, y}, {x, y}]}, and the server answers
with {"type": "calibrated", "ok": bool}. {"cmd": "recalibrate"} clears the
map.

Calibration measurements come from a ring buffer of recent frames: the
client's message arrives after both dwells already streamed past, so the
last two dwell windows in the history are cross A's and cross B's.
"""

from __future__ import annotations

import asyncio
import json
import logging
from collections import deque
from dataclasses import replace

import numpy as np
from websockets.asyncio.server import serve as ws_serve

from .errors import CalibrationFailed, DegenerateCalibration, GazeTrackError
from .gaze import CalibrationMap, calibrate
from .pipeline import PipelineConfig, process_frame

log = logging.getLogger("gazetrack.serve")


class GazeServer:
    def __init__(self, source, config: PipelineConfig = PipelineConfig(),
                 cal: CalibrationMap | None = None, fps: float = 30.0,
                 sinks=(), history_size: int = 600, linger: float | None = None,
                 wait_for_client: bool = False):
        self.source = source
        self.config = config
        self.cal = cal
        self.fps = fps
        self.sinks = sinks
        self.linger = linger  # seconds to stay up after replay ends; None = until clients leave
        self.wait_for_client = wait_for_client  # hold the replay until someone connects
        self.clients = set()
        # (vector, radius) per frame; None when the frame had no detection
        self.history = deque(maxlen=history_size)
        self._frame_id = 0
        self.port: int | None = None

    # --- protocol ----------------------------------------------------------

    def _hello(self) -> str:
        return json.dumps({
            "type": "hello",
            "screen": {"w": self.config.screen.width, "h": self.config.screen.height},
            "calibrated": self.cal is not None,
            "dwell_frames": self.config.dwell_frames,
            "fps": self.fps,
        })

    async def _handle_client(self, ws):
        await ws.send(self._hello())
        self.clients.add(ws)
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    continue
                cmd = msg.get("cmd")
                if cmd == "calibrate":
                    await self._handle_calibrate(ws, msg)
                elif cmd == "recalibrate":
                    self.cal = None
                    await ws.send(json.dumps({"type": "recalibrated", "ok": True}))
        finally:
            self.clients.discard(ws)

    async def _handle_calibrate(self, ws, msg):
        try:
            crosses = [(c["x"], c["y"]) for c in msg["crosses"]]
            if len(crosses) != 2:
                raise KeyError("need 2 crosses")
        except (KeyError, TypeError):
            await ws.send(json.dumps(
                {"type": "calibrated", "ok": False, "error": "malformed crosses"}))
            return
        try:
            self.cal = self._calibrate_from_history(crosses)
            await ws.send(json.dumps({"type": "calibrated", "ok": True}))
        except (CalibrationFailed, DegenerateCalibration, GazeTrackError) as exc:
            await ws.send(json.dumps(
                {"type": "calibrated", "ok": False, "error": str(exc)}))

    def _calibrate_from_history(self, crosses) -> CalibrationMap:
        dwell = self.config.dwell_frames
        if len(self.history) < 2 * dwell:
            raise CalibrationFailed(
                f"only {len(self.history)} frames buffered, need {2 * dwell}")
        recent = list(self.history)[-2 * dwell:]
        halves = (recent[:dwell], recent[dwell:])
        vectors, radii = [], []
        for idx, half in enumerate(halves):
            meas = [m for m in half if m is not None]
            if len(meas) < self.config.min_valid_frames:
                raise CalibrationFailed(
                    f"cross {idx}: {len(meas)} valid frames of {dwell}")
            vectors.append((float(np.median([m[0][0] for m in meas])),
                            float(np.median([m[0][1] for m in meas]))))
            radii.extend(m[1] for m in meas)
        readings = [(vectors[0], crosses[0]), (vectors[1], crosses[1])]
        return calibrate(readings, self.config.model, float(np.median(radii)))

    # --- frame loop ---------------------------------------------------------

    async def _broadcast(self, text: str):
        dead = []
        for ws in self.clients:
            try:
                await ws.send(text)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.clients.discard(ws)

    async def _stream(self):
        period = 1.0 / self.fps if self.fps > 0 else 0.0
        loop = asyncio.get_running_loop()
        for img in self.source.frames():
            t0 = loop.time()
            result = process_frame(img, self.cal, self.config)
            result = replace(result, frame_id=self._frame_id)
            self._frame_id += 1
            if result.iris is not None and result.corner is not None:
                vec = (result.iris.a - result.corner.x,
                       result.iris.b - result.corner.y)
                self.history.append((vec, result.iris.r))
            else:
                self.history.append(None)
            for sink in self.sinks:
                sink(result)
            await self._broadcast(json.dumps(result.to_json_dict()))
            if period:
                elapsed = loop.time() - t0
                if elapsed < period:
                    await asyncio.sleep(period - elapsed)
            else:
                # free-running replay must still yield, or the event loop
                # never services connection handshakes
                await asyncio.sleep(0)
        await self._broadcast(json.dumps({"type": "end"}))

    async def run(self, host: str = "127.0.0.1", port: int = 8008):
        async with ws_serve(self._handle_client, host, port) as server:
            self._server = server
            self.port = next(iter(server.sockets)).getsockname()[1]
            log.info("listening on ws://%s:%d", host, self.port)
            if self.wait_for_client:
                while not self.clients:
                    await asyncio.sleep(0.01)
            await self._stream()
            # a finite replay ends before clients calibrate against the tail
            # of the history, so keep answering commands until they leave
            loop = asyncio.get_running_loop()
            t0 = loop.time()
            while self.clients and (self.linger is None or loop.time() - t0 < self.linger):
                await asyncio.sleep(0.05)


def serve_forever(source, config: PipelineConfig, port: int,
                  host: str = "127.0.0.1", fps: float = 30.0,
                  cal: CalibrationMap | None = None, sinks=(),
                  wait_for_client: bool = False):
    """Blocking entry point used by the CLI."""
    server = GazeServer(source, config=config, cal=cal, fps=fps, sinks=sinks,
                        wait_for_client=wait_for_client)
    asyncio.run(server.run(host=host, port=port))
