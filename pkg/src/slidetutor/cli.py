"""Command line entry points: ingest, plan, simulate, serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import AppConfig, load_config
from .deck import parse_deck, rasterize_deck
from .engine import TutoringEngine, history_clock, wall_clock
from .errors import SlidetutorError
from .gateway import Gateway, HttpBackend, ScriptedBackend
from .harness import ScriptedUser, run_session, transcript_lines
from .service import create_app, run_planning
from .store import LectureStore, SessionStore


def _build_gateway(config: AppConfig, fixtures: Path | None, cursor: Path | None) -> Gateway:
    if fixtures is not None:
        backend = ScriptedBackend.from_file(fixtures, cursor_path=cursor)
    else:
        backend = HttpBackend(
            endpoint=config.gateway.endpoint,
            auth_token=config.gateway.auth_token,
            models=config.gateway.models,
        )
    return Gateway(backend, config.gateway)


def _cmd_ingest(args, config: AppConfig) -> int:
    archive = args.file.read_bytes()
    title = args.title or args.file.stem
    deck = rasterize_deck(parse_deck(archive, title), config.renderer)
    store = LectureStore(Path(config.data_dir))
    record = store.create(deck, lecture_id=args.lecture_id)
    print(record["lecture_id"])
    return 0


def _cmd_plan(args, config: AppConfig) -> int:
    store = LectureStore(Path(config.data_dir))
    gateway = _build_gateway(config, args.fixtures, args.fixture_cursor)
    with store.plan_lease(args.lecture_id):
        run_planning(store, args.lecture_id, gateway, config.engine)
    record = store.record(args.lecture_id)
    print(f"{record['lecture_id']} {record['status']}")
    return 0


def _cmd_simulate(args, config: AppConfig) -> int:
    data_dir = Path(config.data_dir)
    lectures = LectureStore(data_dir)
    sessions = SessionStore(data_dir, registry=lectures.docs.registry)
    gateway = _build_gateway(config, args.fixtures, args.fixture_cursor)
    queue = lectures.load_queue(args.lecture_id)
    clock = history_clock if args.deterministic_clock else wall_clock
    engine = TutoringEngine(queue, gateway, config=config.engine, clock=clock)
    if args.session_id and sessions.exists(args.session_id):
        session = sessions.load(args.session_id)
    else:
        session = engine.start_session(args.lecture_id, args.user_id, session_id=args.session_id)
    user = ScriptedUser.from_file(args.script)
    run_session(engine, session, user, store=sessions, max_steps=args.max_steps)
    for line in transcript_lines(session):
        print(line)
    print(f"# phase={session.phase} cursor={session.cursor} steps={len(session.step_log)}")
    return 0


def _cmd_serve(args, config: AppConfig) -> int:
    import uvicorn

    gateway = None
    if args.fixtures is not None:
        gateway = Gateway(
            ScriptedBackend.from_file(args.fixtures, cursor_path=args.fixture_cursor),
            config.gateway,
        )
    app = create_app(config, gateway=gateway)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="slidetutor")
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--data-dir", default=None, help="override the store directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse and rasterize a slide archive")
    p_ingest.add_argument("file", type=Path)
    p_ingest.add_argument("--title", default=None, help="defaults to the file name")
    p_ingest.add_argument("--lecture-id", default=None)
    p_ingest.set_defaults(func=_cmd_ingest)

    p_plan = sub.add_parser("plan", help="build the agenda and compile the action queue")
    p_plan.add_argument("lecture_id")
    p_plan.add_argument("--fixtures", type=Path, default=None,
                        help="scripted gateway fixture file (offline planning)")
    p_plan.add_argument("--fixture-cursor", type=Path, default=None)
    p_plan.set_defaults(func=_cmd_plan)

    p_sim = sub.add_parser("simulate", help="run a session with a scripted user")
    p_sim.add_argument("lecture_id")
    p_sim.add_argument("--script", type=Path, required=True, help="user event fixture file")
    p_sim.add_argument("--fixtures", type=Path, default=None)
    p_sim.add_argument("--fixture-cursor", type=Path, default=None)
    p_sim.add_argument("--session-id", default=None)
    p_sim.add_argument("--user-id", default="student")
    p_sim.add_argument("--max-steps", type=int, default=None)
    p_sim.add_argument("--deterministic-clock", action="store_true")
    p_sim.set_defaults(func=_cmd_simulate)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--fixtures", type=Path, default=None)
    p_serve.add_argument("--fixture-cursor", type=Path, default=None)
    p_serve.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    config = load_config(args.config)
    if args.data_dir:
        from dataclasses import replace

        config = replace(config, data_dir=args.data_dir)
    try:
        return args.func(args, config)
    except SlidetutorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
