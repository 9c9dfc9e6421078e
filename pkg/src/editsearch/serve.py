"""Serve mode: live runs over HTTP for the topology viewer.

One process hosts many runs. Each run executes in its own thread with a
thread-safe control queue; the HTTP layer never mutates a topology, it
only reads the append-only event log and snapshots, and enqueues control
commands that the run loop applies at its own step boundaries.

Wire surface:
  POST /runs                       start a sim run, returns {run_id}
  GET  /runs/{id}/events?offset=k  newline-delimited JSON event stream
  GET  /runs/{id}/topology         full document snapshot
  GET  /runs/{id}/images/{hash}    image payload by content id
  POST /runs/{id}/control          {kind, state_id?}; 409 once finished

Auth is a single optional bearer token, applied to every route.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse

from .config import apply_overrides, config_digest, derive_config
from .engine import Control, QueueControls, RunLoop, RunResult
from .errors import ConfigError, EditSearchError
from .ports import Backends
from .serialize import topology_to_document
from .simworld import (
    SimActor,
    SimActorParams,
    SimChat,
    SimEmbedder,
    SimScorer,
    SimTask,
)
from .topology import IMAGE_KIND_SIM
from .workspace import Workspace

CONTROL_KINDS = ("pause", "resume", "prune", "force_backtrack", "accept")


@dataclass
class RunHandle:
    run_id: str
    loop: RunLoop
    controls: QueueControls
    config_digest: str
    thread: threading.Thread | None = None
    result: RunResult | None = None
    error: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def finished(self) -> bool:
        with self.lock:
            return self.result is not None or self.error is not None


def _event_doc(event) -> dict:
    return {
        "seq": event.seq,
        "run_id": event.run_id,
        "kind": event.kind,
        "state_id": event.state_id,
        "payload": event.payload,
        "ts": event.ts,
    }


def build_app(workspace: Workspace | None = None, token: str = "") -> FastAPI:
    app = FastAPI(title="editsearch serve")
    runs: dict[str, RunHandle] = {}
    registry_lock = threading.Lock()
    counter = {"next": 0}

    def check_auth(request: Request) -> None:
        if token and request.headers.get("authorization") != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="bad or missing bearer token")

    def get_handle(run_id: str) -> RunHandle:
        with registry_lock:
            handle = runs.get(run_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id}")
        return handle

    @app.post("/runs")
    async def create_run(request: Request):
        check_auth(request)
        body = await request.json()
        try:
            task = SimTask.from_doc(body["task"])
        except (KeyError, TypeError, ValueError, EditSearchError) as exc:
            raise HTTPException(status_code=400, detail=f"bad task: {exc}")
        preset = body.get("preset", "main")
        seed = int(body.get("seed", 0))
        try:
            cfg = derive_config(task.complexity, preset)
            if body.get("overrides"):
                cfg = apply_overrides(cfg, dict(body["overrides"]))
        except (ConfigError, EditSearchError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        params = SimActorParams(
            p=float(body.get("p", 0.85)),
            q=float(body.get("q", 0.05)),
            k=max(task.complexity, cfg.instruction_volume),
            seed=seed,
            persistence=float(body.get("persistence", 0.85)),
        )
        backends = Backends(
            actor=SimActor(params),
            chat=SimChat(),
            embedder=SimEmbedder(),
            scorer=SimScorer(),
        )
        with registry_lock:
            tag = f"serve:{counter['next']}"
            counter["next"] += 1
        controls = QueueControls()
        loop = RunLoop(
            image=task.initial.to_ref(),
            instruction=task.instruction(),
            backends=backends,
            cfg=cfg,
            controls=controls,
            run_tag=tag,
            clock=None,
            workspace=workspace,
        )
        handle = RunHandle(
            run_id=loop.topology.run_id,
            loop=loop,
            controls=controls,
            config_digest=config_digest(cfg),
        )

        def execute():
            try:
                result = loop.execute()
                with handle.lock:
                    handle.result = result
            except Exception as exc:  # run dies, topology stays readable
                with handle.lock:
                    handle.error = f"{type(exc).__name__}: {exc}"

        handle.thread = threading.Thread(target=execute, daemon=True)
        with registry_lock:
            runs[handle.run_id] = handle
        handle.thread.start()
        return {"run_id": handle.run_id}

    @app.get("/runs/{run_id}/events")
    def stream_events(run_id: str, request: Request, offset: int = 0):
        check_auth(request)
        handle = get_handle(run_id)
        if offset < 0:
            raise HTTPException(status_code=400, detail="offset must be >= 0")

        def generate():
            sent = offset
            while True:
                events = handle.loop.topology.events
                while sent < len(events):
                    yield json.dumps(_event_doc(events[sent]), sort_keys=True) + "\n"
                    sent += 1
                if handle.finished:
                    events = handle.loop.topology.events
                    while sent < len(events):
                        yield json.dumps(_event_doc(events[sent]), sort_keys=True) + "\n"
                        sent += 1
                    return
                time.sleep(0.02)

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    @app.get("/runs/{run_id}/topology")
    def topology_snapshot(run_id: str, request: Request):
        check_auth(request)
        handle = get_handle(run_id)
        doc = topology_to_document(handle.loop.topology, handle.config_digest)
        return JSONResponse(doc)

    @app.get("/runs/{run_id}/images/{image_id}")
    def image_by_id(run_id: str, image_id: str, request: Request):
        check_auth(request)
        handle = get_handle(run_id)
        for state in handle.loop.topology.states.values():
            for ref in (state.output, state.input):
                if ref.id == image_id:
                    if ref.kind == IMAGE_KIND_SIM:
                        return Response(ref.locator, media_type="application/json")
                    if workspace is not None and workspace.exists(ref):
                        return Response(workspace.load_bytes(ref), media_type="image/png")
        raise HTTPException(status_code=404, detail=f"no image {image_id} in run {run_id}")

    @app.post("/runs/{run_id}/control")
    async def control(run_id: str, request: Request):
        check_auth(request)
        handle = get_handle(run_id)
        body = await request.json()
        kind = body.get("kind")
        if kind not in CONTROL_KINDS:
            raise HTTPException(status_code=400, detail=f"unknown control kind {kind!r}")
        if handle.finished:
            raise HTTPException(status_code=409, detail="run already finished")
        state_id = body.get("state_id")
        handle.controls.push(Control(kind=kind, state_id=state_id))
        return {"accepted": True}

    @app.get("/runs")
    def list_runs(request: Request):
        check_auth(request)
        with registry_lock:
            handles = list(runs.values())
        return [
            {
                "run_id": h.run_id,
                "finished": h.finished,
                "size": h.loop.topology.size,
                "error": h.error,
            }
            for h in handles
        ]

    return app


def serve(host: str = "127.0.0.1", port: int = 8765, workspace: Workspace | None = None, token: str = "") -> None:
    import uvicorn

    uvicorn.run(build_app(workspace, token), host=host, port=port, log_level="warning")
