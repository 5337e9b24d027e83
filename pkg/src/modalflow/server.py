"""HTTP surface for the agent: sessions, turns, history, health, events.

All error responses share one envelope::

    {"error": {"kind": "...", "detail": "..."}}

with kinds UnknownSession (404), Busy (409), InvalidRequest (422), and
UpstreamFailure (502). The event stream is server-sent events with
``turn_started`` / ``turn_completed`` / ``turn_failed`` events.

When a directory of built UI assets is supplied it is served at ``/`` after
the API routes; the API works identically with no assets present.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .agent import AgentService, Turn
from .errors import AgentStageError, BusyError, ModalflowError, PayloadError, UnknownSessionError
from .payload import Payload


def _error_response(status: int, kind: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"kind": kind, "detail": detail}})


class CreateSessionBody(BaseModel):
    system_prompt: str | None = None


class PostTurnBody(BaseModel):
    text: str
    image_path: str | None = None


def _turn_doc(index: int, turn: Turn) -> dict[str, Any]:
    return {
        "turn_index": index,
        "user_text": turn.user_text,
        "assistant_text": turn.assistant_text,
        "prompt_used": turn.prompt_used,
        "had_image": turn.had_image,
    }


def create_app(service: AgentService, *, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="modalflow agent", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error_response(422, "InvalidRequest", str(exc.errors()))

    @app.exception_handler(UnknownSessionError)
    async def on_unknown_session(request: Request, exc: UnknownSessionError):
        return _error_response(404, "UnknownSession", str(exc))

    @app.exception_handler(BusyError)
    async def on_busy(request: Request, exc: BusyError):
        return _error_response(409, "Busy", str(exc))

    @app.exception_handler(AgentStageError)
    async def on_stage_error(request: Request, exc: AgentStageError):
        return _error_response(502, "UpstreamFailure", str(exc))

    @app.exception_handler(ModalflowError)
    async def on_other_error(request: Request, exc: ModalflowError):
        return _error_response(422, "InvalidRequest", str(exc))

    @app.get("/api/health")
    async def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/api/sessions")
    async def create_session(body: CreateSessionBody | None = None) -> dict[str, str]:
        session = service.create_session(body.system_prompt if body else None)
        return {"session_id": session.id}

    @app.post("/api/sessions/{session_id}/turns")
    async def post_turn(session_id: str, body: PostTurnBody) -> dict[str, Any]:
        image = None
        if body.image_path:
            try:
                image = Payload.image(body.image_path)
            except PayloadError as e:
                return _error_response(422, "InvalidRequest", str(e))
        # Turns do blocking adapter work; keep the event loop free.
        result = await asyncio.to_thread(service.post_turn, session_id, body.text, image=image)
        return {
            "turn_index": result.turn_index,
            "reply": result.reply,
            "prompt_used": result.prompt_used,
        }

    @app.get("/api/sessions/{session_id}/history")
    async def history(session_id: str) -> dict[str, Any]:
        turns = service.history(session_id)
        return {
            "session_id": session_id,
            "turns": [_turn_doc(i, t) for i, t in enumerate(turns)],
        }

    @app.get("/api/sessions/{session_id}/events")
    async def events(session_id: str) -> StreamingResponse:
        service.session(session_id)  # 404 before the stream starts
        queue: asyncio.Queue[tuple[str, Any]] = asyncio.Queue()
        loop = asyncio.get_running_loop()

        def listener(event: str, data: Any) -> None:
            loop.call_soon_threadsafe(queue.put_nowait, (event, data))

        service.add_listener(session_id, listener)

        async def stream():
            while True:
                try:
                    event, data = await asyncio.wait_for(queue.get(), timeout=30.0)
                except asyncio.TimeoutError:
                    yield ": keep-alive\n\n"
                    continue
                yield f"event: {event}\ndata: {json.dumps(data, ensure_ascii=False)}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
