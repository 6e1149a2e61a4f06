"""HTTP/JSON gateway: run management, plugin registration, HILT sessions.

Single-process service. All simulation-affecting commands serialize through
the kernel command queue of the target run; session streams are fan-out
readers of the run's telemetry flow with bounded buffering (track snapshots
drop oldest under backpressure, radio and advisories never drop).
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional

import anyio
import httpx
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from .kernel import ClockMode
from .radio import AsrResult, RadioTurn
from .runner import Runner, RunResult, ScenarioValidationError
from .scenario import ScenarioSpec, load_bundled, load_scenario, list_scenarios

PLUGIN_ROLES = ("asr", "vision", "decision", "nlg")
SNAPSHOT_BUFFER_CAP = 256


@dataclass
class PluginConfig:
    role: str
    base_url: str
    timeout_ms: int = 5000
    enabled: bool = True


@dataclass
class ManagedRun:
    run_id: str
    scenario_id: str
    seed: int
    mode: str
    state: str = "pending"            # pending -> running -> finished | failed
    runner: Optional[Runner] = None
    result: Optional[RunResult] = None
    error: str = ""
    thread: Optional[threading.Thread] = None

    def handle(self) -> dict:
        return {
            "run_id": self.run_id,
            "scenario_id": self.scenario_id,
            "seed": self.seed,
            "mode": self.mode,
            "state": self.state,
        }


class SessionQueue:
    """Per-session outbound buffer. Track snapshots are droppable under
    backpressure; radio turns and advisories are never dropped."""

    def __init__(self, cap: int = SNAPSHOT_BUFFER_CAP):
        self.cap = cap
        self._items: list[dict] = []
        self._dropped_snapshots = 0
        self._cond = threading.Condition()
        self._closed = False

    def push(self, kind: str, payload: dict, ts_ms: int) -> None:
        msg = {"kind": kind, "payload": payload, "ts_ms": ts_ms}
        with self._cond:
            if self._closed:
                return
            if kind == "track_snapshot":
                snapshots = sum(1 for m in self._items if m["kind"] == "track_snapshot")
                if snapshots >= self.cap:
                    for i, m in enumerate(self._items):
                        if m["kind"] == "track_snapshot":
                            del self._items[i]
                            self._dropped_snapshots += 1
                            break
            if kind == "clock":
                msg["payload"] = {**payload, "dropped_snapshots": self._dropped_snapshots}
            self._items.append(msg)
            self._cond.notify_all()

    def pop(self, timeout: float = 0.25) -> Optional[dict]:
        with self._cond:
            if not self._items:
                self._cond.wait(timeout)
            if self._items:
                return self._items.pop(0)
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()


class PluginClient:
    """Outbound HTTP calls to registered plugins with builtin fallback."""

    def __init__(self):
        self.configs: dict[str, PluginConfig] = {}
        self.fallbacks: list[dict] = []

    def register(self, cfg: PluginConfig) -> None:
        self.configs[cfg.role] = cfg

    def enabled(self, role: str) -> Optional[PluginConfig]:
        cfg = self.configs.get(role)
        return cfg if cfg is not None and cfg.enabled else None

    def _post(self, cfg: PluginConfig, path: str, payload: dict) -> Optional[dict]:
        try:
            resp = httpx.post(
                cfg.base_url.rstrip("/") + path,
                json=payload,
                timeout=cfg.timeout_ms / 1000.0,
            )
            resp.raise_for_status()
            if resp.status_code == 204 or not resp.content:
                return None
            return resp.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            self.fallbacks.append({"role": cfg.role, "path": path, "error": str(exc)})
            raise PluginCallError(str(exc)) from exc


class PluginCallError(Exception):
    pass


def _attach_plugins(runner: Runner, plugins: PluginClient) -> None:
    asr_cfg = plugins.enabled("asr")
    if asr_cfg is not None:

        def asr_override(turn: RadioTurn) -> Optional[AsrResult]:
            payload = {
                "turn_id": turn.turn_id,
                "audio_text": turn.degraded_text,
                "snr_db": turn.snr_db,
                "channel_p_err": turn.channel_p_err,
                "t_tx_ms": turn.t_tx_ms,
            }
            try:
                raw = plugins._post(asr_cfg, "/transcribe", payload)
            except PluginCallError:
                return None
            if not isinstance(raw, dict) or "transcript" not in raw:
                plugins.fallbacks.append({"role": "asr", "error": "malformed response"})
                return None
            return AsrResult(
                turn_id=turn.turn_id,
                transcript=str(raw["transcript"]),
                t_asr_out_ms=turn.t_tx_ms + int(raw.get("latency_ms", 0)),
                confidence=float(raw.get("confidence", 1.0)),
            )

        runner.asr_override = asr_override

    vision_cfg = plugins.enabled("vision")
    if vision_cfg is not None:

        def vision_override(camera_id: str, ts_ms: int, snapshot: list[dict], ego_mask: bool):
            payload = {
                "camera_id": camera_id,
                "ts_ms": ts_ms,
                "scene": snapshot,
                "ego_mask": ego_mask,
                "image_ref": None,     # reserved for rendered-frame integrations
            }
            try:
                raw = plugins._post(vision_cfg, "/detect", payload)
            except PluginCallError:
                return None
            if not isinstance(raw, dict) or "detections" not in raw:
                plugins.fallbacks.append({"role": "vision", "error": "malformed response"})
                return None
            return raw["detections"]

        runner.vision_override = vision_override

    decision_cfg = plugins.enabled("decision")
    if decision_cfg is not None:

        def decision_plugin(bundle: dict) -> Optional[dict]:
            try:
                return plugins._post(decision_cfg, "/decide", bundle)
            except PluginCallError:
                return None

        runner.engine.decision_plugin = decision_plugin

    nlg_cfg = plugins.enabled("nlg")
    if nlg_cfg is not None:

        def nlg_plugin(payload: dict) -> Optional[str]:
            try:
                raw = plugins._post(nlg_cfg, "/rewrite", payload)
            except PluginCallError:
                return None
            if isinstance(raw, dict) and isinstance(raw.get("message"), str):
                return raw["message"]
            return None

        runner.engine.nlg_plugin = nlg_plugin


def create_app(scenario_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="skyloop gateway")
    runs: dict[str, ManagedRun] = {}
    plugins = PluginClient()
    lock = threading.Lock()

    def _load(scenario_id: str) -> ScenarioSpec:
        if scenario_dir is not None:
            from pathlib import Path

            candidate = next(Path(scenario_dir).rglob(scenario_id + ".json"), None)
            if candidate is not None:
                return load_scenario(candidate)
        return load_bundled(scenario_id)

    @app.get("/v1/scenarios")
    def scenarios() -> dict:
        return {"scenarios": list_scenarios()}

    @app.post("/v1/runs", status_code=201)
    def start_run(body: dict):
        scenario_id = body.get("scenario_id")
        seed = int(body.get("seed", 0))
        mode = body.get("mode", "fast_time")
        pace = float(body.get("pace", 1.0))
        overrides = body.get("overrides", {}) or {}
        if mode not in ("fast_time", "real_time"):
            return JSONResponse({"detail": f"unknown mode {mode!r}"}, status_code=422)
        try:
            spec = _load(scenario_id)
        except KeyError:
            return JSONResponse({"detail": f"unknown scenario {scenario_id!r}"}, status_code=404)
        clock_mode = ClockMode.FAST_TIME if mode == "fast_time" else ClockMode.REAL_TIME
        try:
            runner = Runner(spec, seed=seed, mode=clock_mode, pace=pace, overrides=overrides)
        except ScenarioValidationError as exc:
            return JSONResponse(
                {"detail": "scenario invalid", "violations": [str(v) for v in exc.violations]},
                status_code=422,
            )
        except ValueError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=422)
        _attach_plugins(runner, plugins)
        run = ManagedRun(
            run_id=uuid.uuid4().hex[:12],
            scenario_id=scenario_id,
            seed=seed,
            mode=mode,
            runner=runner,
        )

        def _execute() -> None:
            run.state = "running"
            try:
                run.result = runner.run()
                run.state = "finished"
            except Exception as exc:  # noqa: BLE001 - reported via the handle
                run.error = str(exc)
                run.state = "failed"

        run.thread = threading.Thread(target=_execute, daemon=True)
        with lock:
            runs[run.run_id] = run
        run.thread.start()
        if mode == "fast_time":
            run.thread.join()
        return run.handle()

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str):
        run = runs.get(run_id)
        if run is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        out = run.handle()
        if run.error:
            out["error"] = run.error
        return out

    @app.get("/v1/runs/{run_id}/scenario")
    def get_run_scenario(run_id: str):
        from .scenario import scenario_to_dict

        run = runs.get(run_id)
        if run is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        return scenario_to_dict(run.runner.spec)

    @app.get("/v1/runs/{run_id}/metrics")
    def get_metrics(run_id: str):
        run = runs.get(run_id)
        if run is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        if run.state != "finished" or run.result is None:
            return JSONResponse({"detail": f"run is {run.state}"}, status_code=409)
        return run.result.metrics.as_dict()

    @app.get("/v1/runs/{run_id}/log")
    def get_log(run_id: str):
        run = runs.get(run_id)
        if run is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        if run.result is not None:
            return PlainTextResponse(run.result.log_text, media_type="application/jsonl")
        return PlainTextResponse(run.runner.log.dump(), media_type="application/jsonl")

    @app.put("/v1/plugins/{role}")
    def put_plugin(role: str, body: dict):
        if role not in PLUGIN_ROLES:
            return JSONResponse({"detail": f"unknown plugin role {role!r}"}, status_code=404)
        cfg = PluginConfig(
            role=role,
            base_url=str(body.get("base_url", "")),
            timeout_ms=int(body.get("timeout_ms", 5000)),
            enabled=bool(body.get("enabled", True)),
        )
        if cfg.enabled and not cfg.base_url:
            return JSONResponse({"detail": "base_url required for enabled plugin"}, status_code=422)
        plugins.register(cfg)
        return {"role": role, "base_url": cfg.base_url, "timeout_ms": cfg.timeout_ms, "enabled": cfg.enabled}

    @app.get("/v1/plugins")
    def get_plugins():
        return {
            "plugins": [
                {"role": c.role, "base_url": c.base_url, "timeout_ms": c.timeout_ms, "enabled": c.enabled}
                for c in plugins.configs.values()
            ],
            "fallbacks": plugins.fallbacks[-20:],
        }

    @app.websocket("/v1/runs/{run_id}/session")
    async def session(ws: WebSocket, run_id: str):
        await ws.accept()
        run = runs.get(run_id)
        if run is None:
            await ws.send_json({"kind": "error", "payload": {"detail": "unknown run"}, "ts_ms": 0})
            await ws.close()
            return
        if run.mode != "real_time":
            await ws.send_json(
                {"kind": "error", "payload": {"detail": "sessions require a real_time run"}, "ts_ms": 0}
            )
            await ws.close()
            return
        if run.state == "finished" or run.state == "failed":
            await ws.send_json(
                {"kind": "error", "payload": {"detail": f"run is {run.state}"}, "ts_ms": 0}
            )
            await ws.close()
            return
        runner = run.runner
        session_id = uuid.uuid4().hex[:8]
        queue = SessionQueue()
        runner.subscribe(queue.push)
        claimed: list[str] = []
        stop = threading.Event()

        async def sender() -> None:
            while not stop.is_set():
                msg = await anyio.to_thread.run_sync(queue.pop)
                if msg is not None:
                    await ws.send_json(msg)

        import asyncio

        sender_task = asyncio.create_task(sender())
        try:
            while True:
                frame = await ws.receive_json()
                kind = frame.get("kind")
                payload = frame.get("payload", {}) or {}
                if kind == "role_claim":
                    actor_id = payload.get("actor_id", "")
                    ok, err = runner.claim_actor(actor_id, session_id)
                    if ok:
                        claimed.append(actor_id)
                        queue.push("role_grant", {"actor_id": actor_id}, runner.sim.clock.now_ms)
                    else:
                        queue.push("error", {"detail": err, "request": "role_claim"}, runner.sim.clock.now_ms)
                elif kind == "transmit_request":
                    if not claimed:
                        queue.push(
                            "error",
                            {"detail": "no role claimed", "request": "transmit_request"},
                            runner.sim.clock.now_ms,
                        )
                        continue
                    text = (payload.get("text") or "").strip()
                    frequency = payload.get("frequency", "")
                    if not text:
                        queue.push(
                            "error",
                            {"detail": "empty text", "request": "transmit_request"},
                            runner.sim.clock.now_ms,
                        )
                        continue
                    if frequency not in runner.spec.geometry.frequencies:
                        queue.push(
                            "error",
                            {"detail": f"unknown frequency {frequency!r}", "request": "transmit_request"},
                            runner.sim.clock.now_ms,
                        )
                        continue
                    turn_id = runner.alloc_human_turn_id()
                    runner.inject_human_turn(
                        claimed[0], frequency, payload.get("addressed_to"), text, turn_id
                    )
                    queue.push("ack_transmit", {"turn_id": turn_id}, runner.sim.clock.now_ms)
                else:
                    queue.push(
                        "error", {"detail": f"unknown kind {kind!r}"}, runner.sim.clock.now_ms
                    )
        except WebSocketDisconnect:
            pass
        finally:
            stop.set()
            queue.close()
            sender_task.cancel()
            for actor_id in claimed:
                runner.release_actor(actor_id, session_id)

    return app
