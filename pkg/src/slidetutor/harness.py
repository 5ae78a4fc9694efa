"""Scripted-user driver: runs sessions without a human in the loop.

The user script's position is derived from the session itself (count of user
utterances already in history), so a resumed session continues the script at
the right event with no extra bookkeeping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .engine import COMPLETE, Session, TutoringEngine
from .store import SessionStore


@dataclass
class ScriptedUser:
    events: list[dict]

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedUser":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(events=list(doc["events"] if isinstance(doc, dict) else doc))

    def next_event(self, session: Session) -> dict | None:
        consumed = sum(1 for utt in session.history if utt.speaker == "user")
        if consumed >= len(self.events):
            return None
        return self.events[consumed]


def run_session(
    engine: TutoringEngine,
    session: Session,
    user: ScriptedUser,
    store: SessionStore | None = None,
    max_steps: int | None = None,
) -> Session:
    """Alternate engine steps and scripted user events until the session
    completes, the script runs dry, or max_steps engine steps have run.

    With a store attached, the session is persisted after every step and
    every user event; stopping at max_steps leaves a resumable snapshot.
    """
    if store is not None:
        store.save(session)
    while session.phase != COMPLETE:
        if max_steps is not None and len(session.step_log) >= max_steps:
            break
        if session.pending_step is not None:
            engine.run_step(session)
            if store is not None:
                store.save(session)
            continue
        event = user.next_event(session)
        if event is None:
            break
        engine.submit_user_event(session, event)
        if store is not None:
            store.save(session)
    return session


def transcript_lines(session: Session) -> list[str]:
    """Readable one-line-per-utterance rendering, used by `simulate`."""
    return [
        f"[{utt.timestamp:.0f}] {utt.speaker} ({utt.kind}): {utt.content}"
        for utt in session.history
    ]
