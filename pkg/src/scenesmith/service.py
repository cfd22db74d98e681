"""HTTP service exposing interactive episodes to the companion UI.

Sessions hold a scene that successive instructions keep modifying; each
instruction runs one episode in a background thread while an SSE stream
pushes one event per step plus a terminal event. Events are kept for the
session's lifetime so a reconnecting client can catch up from any index.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from .assets import AssetFactory
from .backends import Backend
from .config import AgentConfig, preset
from .episode import (
    EP_FINISHED,
    EpisodeResult,
    StepRecord,
    run_episode,
    transcript_to_dicts,
)
from .scene import Scene, SceneFormatError, scene_from_dict, scene_to_dict

API_PREFIX = "/api/v1"

IDLE = "idle"
RUNNING = "running"
AWAITING_INSTRUCTION = "awaiting_instruction"


@dataclass
class Session:
    id: str
    scene: Scene
    config: AgentConfig
    status: str = IDLE
    episode_count: int = 0
    events: list[dict] = field(default_factory=list)
    images: dict[str, bytes] = field(default_factory=dict)
    results: list[EpisodeResult] = field(default_factory=list)
    assets: AssetFactory = field(default_factory=AssetFactory)
    lock: threading.Lock = field(default_factory=threading.Lock)
    new_event: threading.Condition = field(default_factory=threading.Condition)
    cancel_flag: threading.Event = field(default_factory=threading.Event)

    def append_event(self, event: dict) -> None:
        with self.new_event:
            self.events.append(event)
            self.new_event.notify_all()


def _image_urls(session: Session, episode: int, record: StepRecord) -> dict | None:
    if not record.images:
        return None
    urls = {}
    for view_name, data in record.images.items():
        name = f"ep{episode}_step{record.index}_{view_name}.png"
        session.images[name] = data
        urls[view_name] = f"{API_PREFIX}/sessions/{session.id}/images/{name}"
    return urls


def step_event(session: Session, episode: int, record: StepRecord, scene: Scene) -> dict:
    from .actions import action_to_dict

    return {
        "type": "step",
        "episode": episode,
        "step": record.index,
        "action": action_to_dict(record.action) if record.action is not None else None,
        "thought": record.action.thought if record.action is not None else None,
        "error": ({"kind": record.error.kind, "message": record.error.message}
                  if record.error is not None else None),
        "outcome": ({"status": record.outcome.status, "detail": record.outcome.detail}
                    if record.outcome is not None else None),
        "scene": scene_to_dict(scene),
        "images": _image_urls(session, episode, record),
    }


def end_event(episode: int, termination: str, reason: str, scene: Scene) -> dict:
    return {
        "type": "end",
        "episode": episode,
        "termination": termination,
        "reason": reason,
        "scene": scene_to_dict(scene),
    }


def create_app(backend_factory: Callable[[], Backend], *,
               default_scene_factory: Callable[[], Scene],
               config: AgentConfig | None = None,
               episodes_dir: str | Path | None = None,
               frontend_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="scenesmith", version="0.1.0")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    sessions: dict[str, Session] = {}
    default_config = config or preset("method1")

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def session_info(session: Session) -> dict:
        return {
            "id": session.id,
            "status": session.status,
            "method": session.config.name,
            "episodes": session.episode_count,
            "events": len(session.events),
            "scene": scene_to_dict(session.scene),
        }

    @app.get(API_PREFIX + "/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post(API_PREFIX + "/sessions", status_code=201)
    async def create_session(request: Request) -> dict:
        body = {}
        raw = await request.body()
        if raw:
            try:
                body = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise HTTPException(status_code=400, detail=f"invalid JSON body: {exc}")
        if body.get("scene") is not None:
            try:
                scene = scene_from_dict(body["scene"])
            except SceneFormatError as exc:
                raise HTTPException(status_code=400, detail=f"invalid scene: {exc}")
        else:
            scene = default_scene_factory()
        session_config = default_config
        if body.get("method"):
            try:
                session_config = preset(str(body["method"]))
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
        session = Session(id=uuid.uuid4().hex[:12], scene=scene, config=session_config)
        sessions[session.id] = session
        return session_info(session)

    @app.get(API_PREFIX + "/sessions/{session_id}")
    def get_session_state(session_id: str) -> dict:
        return session_info(get_session(session_id))

    @app.post(API_PREFIX + "/sessions/{session_id}/instructions", status_code=202)
    async def submit_instruction(session_id: str, request: Request) -> dict:
        session = get_session(session_id)
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise HTTPException(status_code=400, detail=f"invalid JSON body: {exc}")
        instruction = body.get("instruction")
        if not isinstance(instruction, str) or not instruction.strip():
            raise HTTPException(status_code=400, detail='"instruction" must be non-empty text')

        with session.lock:
            if session.status == RUNNING:
                raise HTTPException(status_code=409, detail="an episode is already running")
            session.status = RUNNING
            session.cancel_flag.clear()
            episode = session.episode_count
            session.episode_count += 1

        def work() -> None:
            backend = backend_factory()

            def on_step(record: StepRecord, scene: Scene) -> None:
                session.append_event(step_event(session, episode, record, scene))

            try:
                result = run_episode(session.config, instruction, session.scene, backend,
                                     assets=session.assets, on_step=on_step,
                                     should_stop=session.cancel_flag.is_set)
            except Exception as exc:  # defensive: a crash must still emit a terminal event
                session.status = AWAITING_INSTRUCTION
                session.append_event(end_event(episode, "backend_failure", str(exc),
                                               session.scene))
                return
            session.scene = result.final_scene
            session.results.append(result)
            if episodes_dir is not None:
                from .episode import save_episode

                save_episode(result, Path(episodes_dir) / f"{session.id}_ep{episode}")
            reason = result.termination
            if result.termination == EP_FINISHED and result.transcript.steps:
                reason = result.transcript.steps[-1].outcome.detail
            session.status = AWAITING_INSTRUCTION
            session.append_event(end_event(episode, result.termination, reason,
                                           result.final_scene))

        threading.Thread(target=work, daemon=True).start()
        return {"episode": episode}

    @app.post(API_PREFIX + "/sessions/{session_id}/cancel")
    def cancel(session_id: str) -> dict:
        session = get_session(session_id)
        if session.status != RUNNING:
            raise HTTPException(status_code=409, detail="no episode is running")
        session.cancel_flag.set()
        return {"status": "cancelling"}

    @app.get(API_PREFIX + "/sessions/{session_id}/scene")
    def get_scene(session_id: str) -> dict:
        return scene_to_dict(get_session(session_id).scene)

    @app.get(API_PREFIX + "/sessions/{session_id}/transcript")
    def get_transcript(session_id: str) -> dict:
        session = get_session(session_id)
        return {"episodes": [transcript_to_dicts(result) for result in session.results]}

    @app.get(API_PREFIX + "/sessions/{session_id}/images/{name}")
    def get_image(session_id: str, name: str) -> Response:
        session = get_session(session_id)
        data = session.images.get(name)
        if data is None:
            raise HTTPException(status_code=404, detail=f"unknown image {name!r}")
        return Response(content=data, media_type="image/png")

    @app.get(API_PREFIX + "/sessions/{session_id}/events")
    def events(session_id: str, request: Request, since: int = 0) -> StreamingResponse:
        session = get_session(session_id)
        start = since
        header_id = request.headers.get("last-event-id")
        if header_id is not None and header_id.isdigit():
            start = int(header_id) + 1

        def stream():
            index = start
            idle_ticks = 0
            while True:
                with session.new_event:
                    if index >= len(session.events):
                        session.new_event.wait(timeout=0.25)
                batch = session.events[index:]
                if not batch:
                    idle_ticks += 1
                    if idle_ticks >= 60:  # keepalive comment roughly every 15s
                        idle_ticks = 0
                        yield ": keepalive\n\n"
                    continue
                idle_ticks = 0
                for event in batch:
                    yield f"id: {index}\ndata: {json.dumps(event, ensure_ascii=False)}\n\n"
                    index += 1
                    if event["type"] == "end":
                        return

        return StreamingResponse(stream(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException) -> JSONResponse:
        return JSONResponse(status_code=exc.status_code, content={"error": exc.detail})

    return app
