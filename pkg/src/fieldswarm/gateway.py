"""Live gateway: wraps the engine for the operator console.

One engine thread owns simulation state and wall-clock pacing (the engine
itself stays logical-time); WebSocket connections talk to it only through
the engine's thread-safe injection queue and a published-snapshot sequence,
so no mutable simulation state crosses the boundary.

Wire messages (JSON text frames, all carrying "v": 1):

    client -> server
      {"v":1, "type":"instruction", "text": "..."}
      {"v":1, "type":"inject", "x":.., "y":.., "w":.., "sigma":.., "task_type":".."}
      {"v":1, "type":"control", "action":"start"|"pause"|"reset"}
      {"v":1, "type":"control", "action":"strategy", "name":"gwo"}   (only before start)

    server -> client
      {"v":1, "type":"hello", ...}            once per connection
      {"v":1, "type":"snapshot", ...}         monotone step per run epoch
      {"v":1, "type":"ack", "what": ...}
      {"v":1, "type":"error", "where":.., "reason":..}
      {"v":1, "type":"status", "state":"terminal", ...}  on engine abort

HTTP: GET /health, GET /corpus, GET /scenarios, GET /scenarios/{name},
POST /inject (task_model wire format {"cmd":"inject", ..., "type":..}).
"""

from __future__ import annotations

import asyncio
import json
import threading
import time

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .baselines import STRATEGY_NAMES
from .engine import Engine, EngineError, SimConfig
from .field import FieldParams
from .parsing import ParseError, default_lexicon, load_corpus, parse_instruction
from .scenario import load_scenario, make_city_scenario, make_minimal_scenario


def snapshot_message(snap, epoch: int, phi_stride: int) -> dict:
    return {
        "v": 1,
        "type": "snapshot",
        "epoch": epoch,
        "step": snap.step,
        "world": {
            "width": snap.world.width,
            "height": snap.world.height,
            "cell_size": snap.world.cell_size,
        },
        "tasks": [
            {
                "id": t.id,
                "x": t.x,
                "y": t.y,
                "w": t.weight,
                "sigma": t.sigma,
                "task_type": t.task_type,
                "state": t.state,
            }
            for t in snap.tasks
        ],
        "uavs": [
            {
                "id": u.id,
                "uav_type": u.uav_type,
                "x": u.x,
                "y": u.y,
                "vx": u.vx,
                "vy": u.vy,
                "status": u.status,
                "capability": u.capability,
            }
            for u in snap.uavs
        ],
        "entities": [
            {"id": e.id, "kind": e.kind, "x": e.x, "y": e.y} for e in snap.world.entities
        ],
        "traffic_lights": [
            {"x": t.x, "y": t.y, "color": t.color()} for t in snap.world.traffic_lights
        ],
        "phi": snap.phi_downsampled(phi_stride),
        "metrics": snap.metrics_so_far,
    }


class GatewayService:
    """Engine thread plus snapshot publication; one instance per process."""

    def __init__(
        self,
        scenario,
        strategy: str = "coordfield",
        seed: int = 0,
        steps: int = 100_000,
        pace: float = 10.0,
        snapshot_stride: int = 1,
        field_params: FieldParams | None = None,
        phi_stride: int | None = None,
    ):
        self._scenario_source = scenario
        self._strategy = strategy
        self._seed = seed
        self._steps = steps
        self.pace = pace
        self.stride = max(1, snapshot_stride)
        self._field_params = field_params or FieldParams()
        self._lock = threading.Lock()
        self._running = threading.Event()
        self._stop = threading.Event()
        self._epoch = 0
        self._terminal: dict | None = None
        self._build_engine()
        w = self.engine.world.width
        self.phi_stride = phi_stride or max(1, w // 50)
        self._publish(self.engine.snapshot())
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    # -- engine thread ------------------------------------------------- #

    def _build_engine(self) -> None:
        cfg = SimConfig(
            scenario=self._scenario_source,
            strategy=self._strategy,
            t_max=self._steps,
            seed=self._seed,
            field_params=self._field_params,
        )
        self.engine = Engine(cfg)
        self._terminal = None

    def _publish(self, snap) -> None:
        msg = snapshot_message(snap, self._epoch, getattr(self, "phi_stride", 4))
        self.latest = (self._epoch, snap.step, msg)

    def _loop(self) -> None:
        while not self._stop.is_set():
            if self._running.is_set() and not self.engine.done() and self._terminal is None:
                with self._lock:
                    try:
                        for _ in range(self.stride):
                            if self.engine.done():
                                break
                            self.engine.advance()
                        self._publish(self.engine.snapshot())
                    except EngineError as exc:
                        self._terminal = {
                            "v": 1,
                            "type": "status",
                            "state": "terminal",
                            "reason": str(exc),
                            "step": self.engine.step_index,
                        }
                        self._running.clear()
            time.sleep(1.0 / self.pace)

    def shutdown(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)

    # -- control surface (called from request handlers) ----------------- #

    def start(self) -> None:
        self._running.set()

    def pause(self) -> None:
        self._running.clear()

    def reset(self) -> None:
        with self._lock:
            self._running.clear()
            self._epoch += 1
            self._build_engine()
            self._publish(self.engine.snapshot())

    def set_strategy(self, name: str) -> None:
        if name not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {name!r}")
        if self._running.is_set() or self.engine.step_index > 0:
            raise ValueError("strategy is fixed per run; reset first")
        with self._lock:
            self._strategy = name
            self._build_engine()
            self._publish(self.engine.snapshot())

    def inject_drafts(self, drafts) -> None:
        for d in drafts:
            self.engine.inject_command({"cmd": "inject", **d})

    def handle_message(self, msg: dict) -> dict:
        """Process one client message; returns the reply dict."""
        if not isinstance(msg, dict) or msg.get("v") != 1 or "type" not in msg:
            return {"v": 1, "type": "error", "where": "envelope",
                    "reason": "messages need v=1 and a type"}
        kind = msg["type"]
        if kind == "instruction":
            try:
                cmd = parse_instruction(
                    str(msg.get("text", "")), world=self.engine.world, lexicon=self.lexicon
                )
            except ParseError as exc:
                return {"v": 1, "type": "error", "where": "instruction", "reason": str(exc)}
            self.inject_drafts([d.to_dict() for d in cmd.tasks])
            return {
                "v": 1,
                "type": "ack",
                "what": "instruction",
                "tasks": len(cmd.tasks),
                "confidence": cmd.confidence,
            }
        if kind == "inject":
            try:
                draft = {
                    "x": float(msg["x"]),
                    "y": float(msg["y"]),
                    "w": float(msg["w"]),
                    "sigma": float(msg.get("sigma", 25.0)),
                    "type": str(msg.get("task_type", msg.get("type_", ""))),
                }
            except (KeyError, TypeError, ValueError) as exc:
                return {"v": 1, "type": "error", "where": "inject", "reason": f"bad fields: {exc}"}
            if draft["type"] not in ("patrol", "tracking"):
                return {"v": 1, "type": "error", "where": "inject",
                        "reason": f"unknown task_type {draft['type']!r}"}
            self.inject_drafts([draft])
            return {"v": 1, "type": "ack", "what": "inject"}
        if kind == "control":
            action = msg.get("action")
            try:
                if action == "start":
                    self.start()
                elif action == "pause":
                    self.pause()
                elif action == "reset":
                    self.reset()
                elif action == "strategy":
                    self.set_strategy(str(msg.get("name", "")))
                else:
                    return {"v": 1, "type": "error", "where": "control",
                            "reason": f"unknown action {action!r}"}
            except ValueError as exc:
                return {"v": 1, "type": "error", "where": "control", "reason": str(exc)}
            return {"v": 1, "type": "ack", "what": f"control:{action}"}
        return {"v": 1, "type": "error", "where": "envelope", "reason": f"unknown type {kind!r}"}

    lexicon = None  # set by build_app


BUNDLED_SCENARIOS = {
    "minimal": make_minimal_scenario,
    "city_small": lambda: make_city_scenario(width=240, height=240, n_uavs=8, n_tasks=6,
                                             n_entities=60, block=40, street=16),
    "city_full": make_city_scenario,
}


def build_app(service: GatewayService) -> FastAPI:
    app = FastAPI(title="fieldswarm gateway")
    service.lexicon = default_lexicon()

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "running": service._running.is_set(),
            "step": service.engine.step_index,
            "epoch": service._epoch,
            "strategy": service._strategy,
        }

    @app.get("/corpus")
    def corpus():
        return load_corpus()

    @app.get("/scenarios")
    def scenarios():
        return sorted(BUNDLED_SCENARIOS)

    @app.get("/scenarios/{name}")
    def scenario_doc(name: str):
        if name not in BUNDLED_SCENARIOS:
            return JSONResponse({"error": f"unknown scenario {name!r}"}, status_code=404)
        return BUNDLED_SCENARIOS[name]()

    @app.post("/inject")
    async def inject(payload: dict):
        if payload.get("cmd") != "inject":
            return JSONResponse({"error": "payload must carry cmd='inject'"}, status_code=400)
        try:
            draft = {
                "x": float(payload["x"]),
                "y": float(payload["y"]),
                "w": float(payload["w"]),
                "sigma": float(payload.get("sigma", 25.0)),
                "type": str(payload["type"]),
            }
        except (KeyError, TypeError, ValueError) as exc:
            return JSONResponse({"error": f"bad fields: {exc}"}, status_code=400)
        service.inject_drafts([draft])
        return {"ok": True}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        outq: asyncio.Queue = asyncio.Queue()
        await outq.put(
            {
                "v": 1,
                "type": "hello",
                "strategies": list(STRATEGY_NAMES),
                "strategy": service._strategy,
                "pace": service.pace,
            }
        )

        async def watcher():
            last = (-1, -1)
            terminal_sent = False
            while True:
                epoch, step, msg = service.latest
                if (epoch, step) != last:
                    last = (epoch, step)
                    await outq.put(msg)
                if service._terminal is not None and not terminal_sent:
                    await outq.put(service._terminal)
                    terminal_sent = True
                await asyncio.sleep(min(0.05, 1.0 / service.pace))

        async def reader():
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    await outq.put(
                        {"v": 1, "type": "error", "where": "envelope",
                         "reason": f"not JSON: {exc}"}
                    )
                    continue
                await outq.put(service.handle_message(msg))

        async def writer():
            while True:
                msg = await outq.get()
                await ws.send_text(json.dumps(msg, sort_keys=True))

        tasks = [asyncio.create_task(c()) for c in (watcher, reader, writer)]
        try:
            done, pending = await asyncio.wait(tasks, return_when=asyncio.FIRST_EXCEPTION)
            for t in done:
                exc = t.exception()
                if exc and not isinstance(exc, WebSocketDisconnect):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            for t in tasks:
                t.cancel()

    return app


def serve(
    scenario,
    strategy: str = "coordfield",
    seed: int = 0,
    steps: int = 100_000,
    host: str = "127.0.0.1",
    port: int = 8000,
    pace: float = 10.0,
    snapshot_stride: int = 1,
    field_params: FieldParams | None = None,
) -> None:
    """Build the service and block serving HTTP + WebSocket."""
    import uvicorn

    load_scenario(scenario)  # validate before binding the port
    service = GatewayService(
        scenario,
        strategy=strategy,
        seed=seed,
        steps=steps,
        pace=pace,
        snapshot_stride=snapshot_stride,
        field_params=field_params,
    )
    app = build_app(service)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        service.shutdown()
