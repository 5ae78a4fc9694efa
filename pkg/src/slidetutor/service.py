"""HTTP surface: lecture upload and planning, queue editing, live sessions.

The app factory takes an optional pre-built gateway so tests and the CLI can
run the whole service against scripted fixtures with no network at all.
"""

from __future__ import annotations

import json
import threading
import time
from collections import defaultdict
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse

from .agenda import agenda_to_dict, build_agenda
from .config import AppConfig
from .deck import parse_deck, rasterize_deck
from .engine import COMPLETE, Session, TutoringEngine
from .errors import (
    BadIndex,
    BadPosition,
    EmptyCompletion,
    EmptyDeck,
    GatewayError,
    InvariantViolation,
    MalformedArchive,
    MalformedOutline,
    NoPendingStep,
    NoQueue,
    NotAwaitingInput,
    PageCountMismatch,
    PlanInProgress,
    RendererFailed,
    SchemaViolation,
    SlidetutorError,
    StaleRevision,
    UnknownLecture,
    UnknownSession,
)
from .gateway import Gateway, HttpBackend
from .planner import compile_queue
from .actions import revise_queue
from .store import LectureStore, SessionStore, envelopes

_STATUS_CODES: list[tuple[type, int]] = [
    (UnknownLecture, 404),
    (UnknownSession, 404),
    (StaleRevision, 409),
    (PlanInProgress, 409),
    (NotAwaitingInput, 409),
    (NoQueue, 409),
    (NoPendingStep, 409),
    (MalformedArchive, 422),
    (EmptyDeck, 422),
    (InvariantViolation, 422),
    (BadIndex, 422),
    (BadPosition, 422),
    (MalformedOutline, 422),
    (SchemaViolation, 422),
    (PageCountMismatch, 422),
    (RendererFailed, 502),
    (GatewayError, 502),
    (EmptyCompletion, 502),
]


def _status_for(exc: SlidetutorError) -> int:
    for klass, code in _STATUS_CODES:
        if isinstance(exc, klass):
            return code
    return 500


def run_planning(lectures: LectureStore, lecture_id: str, gateway: Gateway, engine_config) -> None:
    """Agenda build + queue compile with checkpoints; statuses advance as
    each stage lands. Shared by the HTTP handler and the CLI."""
    deck = lectures.load_deck(lecture_id)
    agenda = build_agenda(
        deck,
        gateway,
        engine_config,
        checkpoint_path=lectures.agenda_checkpoint(lecture_id),
        on_described=lambda: lectures.set_status(lecture_id, "described"),
    )
    lectures.save_agenda(lecture_id, agenda)
    lectures.set_status(lecture_id, "segmented")
    queue = compile_queue(
        agenda,
        deck,
        gateway,
        engine_config,
        lecture_id=lecture_id,
        checkpoint_path=lectures.plan_checkpoint(lecture_id),
    )
    lectures.save_queue(lecture_id, queue)
    lectures.set_status(lecture_id, "planned")
    lectures.clear_checkpoints(lecture_id)


def create_app(config: AppConfig | None = None, gateway: Gateway | None = None) -> FastAPI:
    config = config or AppConfig()
    if gateway is None:
        backend = HttpBackend(
            endpoint=config.gateway.endpoint,
            auth_token=config.gateway.auth_token,
            models=config.gateway.models,
        )
        gateway = Gateway(backend, config.gateway)

    app = FastAPI(title="slidetutor", docs_url=None, redoc_url=None)
    data_dir = Path(config.data_dir)
    lectures = LectureStore(data_dir)
    sessions = SessionStore(data_dir, registry=lectures.docs.registry)
    session_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
    state_lock = threading.Lock()

    app.state.config = config
    app.state.gateway = gateway
    app.state.lectures = lectures
    app.state.sessions = sessions

    @app.exception_handler(SlidetutorError)
    def _domain_error(request: Request, exc: SlidetutorError) -> JSONResponse:
        del request
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    def _engine_for(session: Session) -> TutoringEngine:
        queue = lectures.load_queue(session.lecture_id)
        return TutoringEngine(queue, gateway, config=config.engine)

    def _drive(engine: TutoringEngine, session: Session) -> None:
        # inline step worker: run auto-steps, persisting after each one
        while session.pending_step is not None and session.phase != COMPLETE:
            engine.run_step(session)
            sessions.save(session)

    # --- lectures -------------------------------------------------------

    @app.post("/lectures")
    async def upload_lecture(request: Request, title: str = Query(...)):
        archive = await request.body()
        deck = parse_deck(archive, title)
        deck = rasterize_deck(deck, config.renderer)
        record = lectures.create(deck)
        return record

    @app.get("/lectures/{lecture_id}")
    def get_lecture(lecture_id: str):
        return lectures.record(lecture_id)

    def _run_plan(lecture_id: str) -> None:
        run_planning(lectures, lecture_id, gateway, config.engine)

    @app.post("/lectures/{lecture_id}/plan")
    def plan_lecture(lecture_id: str, wait: bool = Query(default=True)):
        record = lectures.record(lecture_id)
        if record["status"] in ("planned", "published"):
            return record
        if wait:
            with lectures.plan_lease(lecture_id):
                _run_plan(lecture_id)
            return lectures.record(lecture_id)

        # reserve before returning so a racing second call conflicts now
        lectures.acquire_plan(lecture_id)

        def runner() -> None:
            try:
                _run_plan(lecture_id)
            except SlidetutorError:
                pass  # progress stays queryable; checkpoints allow re-trigger
            finally:
                lectures.release_plan(lecture_id)

        threading.Thread(target=runner, daemon=True).start()
        return lectures.record(lecture_id)

    @app.get("/lectures/{lecture_id}/agenda")
    def get_agenda(lecture_id: str):
        return agenda_to_dict(lectures.load_agenda(lecture_id))

    @app.get("/lectures/{lecture_id}/actions")
    def get_actions(lecture_id: str):
        return lectures.load_queue(lecture_id).to_dict()

    @app.patch("/lectures/{lecture_id}/actions")
    async def patch_actions(lecture_id: str, request: Request):
        body = await request.json()
        with state_lock:
            queue = lectures.load_queue(lecture_id)
            if body.get("revision") != queue.revision:
                raise StaleRevision(
                    f"edit targets revision {body.get('revision')}, queue is at {queue.revision}"
                )
            deck = lectures.load_deck(lecture_id)
            revised = revise_queue(queue, body.get("edits", []), page_count=len(deck.pages))
            lectures.save_queue(lecture_id, revised)
        return revised.to_dict()

    @app.post("/lectures/{lecture_id}/publish")
    def publish_lecture(lecture_id: str):
        record = lectures.record(lecture_id)
        if record["status"] not in ("planned", "published"):
            raise NoQueue(f"lecture {lecture_id!r} is {record['status']}, not planned")
        return lectures.set_status(lecture_id, "published")

    # --- sessions -------------------------------------------------------

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.json()
        lecture_id = body["lecture_id"]
        user_id = body.get("user_id", "student")
        lectures.record(lecture_id)  # 404 on unknown lecture
        queue = lectures.load_queue(lecture_id)
        engine = TutoringEngine(queue, gateway, config=config.engine)
        session = engine.start_session(lecture_id, user_id, session_id=body.get("session_id"))
        sessions.save(session)
        with session_locks[session.session_id]:
            _drive(engine, session)
        return {
            "session_id": session.session_id,
            "lecture_id": lecture_id,
            "phase": session.phase,
            "cursor": session.cursor,
        }

    @app.post("/sessions/{session_id}/events")
    async def post_event(session_id: str, request: Request):
        body = await request.json()
        with session_locks[session_id]:
            session = sessions.load(session_id)
            engine = _engine_for(session)
            engine.submit_user_event(session, body)
            sessions.save(session)
            _drive(engine, session)
        return {
            "session_id": session_id,
            "phase": session.phase,
            "cursor": session.cursor,
            "seq_end": len(session.history),
        }

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str):
        session = sessions.load(session_id)
        return {
            "session_id": session_id,
            "phase": session.phase,
            "cursor": session.cursor,
            "events": envelopes(session),
        }

    @app.get("/sessions/{session_id}/stream")
    def stream_events(
        session_id: str,
        request: Request,
        from_seq: int = Query(default=0, alias="from"),
        follow: bool = Query(default=False),
        poll_s: float = Query(default=0.1),
    ):
        sessions.load(session_id)  # 404 before the stream starts
        last_header = request.headers.get("last-event-id")
        start = from_seq
        if last_header is not None:
            start = max(start, int(last_header) + 1)

        def gen():
            seq = start
            while True:
                session = sessions.load(session_id)
                for envelope in envelopes(session, from_seq=seq):
                    seq = envelope["seq"] + 1
                    data = json.dumps(envelope, ensure_ascii=False)
                    yield f"id: {envelope['seq']}\ndata: {data}\n\n"
                if not follow or session.phase == COMPLETE:
                    break
                time.sleep(poll_s)

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.get("/healthz")
    def healthz():
        return Response(content="ok", media_type="text/plain")

    return app
