"""File-backed persistence for lectures and sessions.

Every document is written atomically as canonical JSON and checked against
its schema both when written and when read back, so a corrupt or hand-edited
file fails loudly at the boundary instead of deep in the engine.
"""

from __future__ import annotations

import json
import threading
import uuid
from contextlib import contextmanager
from importlib import resources
from pathlib import Path

from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from .actions import ActionQueue
from .agenda import Agenda, agenda_from_dict, agenda_to_dict
from .deck import SlideDeck, deck_from_manifest, write_deck_files
from .engine import Session
from .errors import (
    InvariantViolation,
    NoQueue,
    PlanInProgress,
    SchemaViolation,
    UnknownLecture,
    UnknownSession,
)
from .jsonio import atomic_write_json, read_json

STATUS_ORDER = ["ingested", "described", "segmented", "planned", "published"]


class SchemaRegistry:
    """Loads the schemas shipped with the package and validates documents."""

    def __init__(self):
        self._validators: dict[str, Draft202012Validator] = {}
        schemas = {}
        schema_dir = resources.files("slidetutor").joinpath("schemas")
        for entry in schema_dir.iterdir():
            if entry.name.endswith(".json"):
                schemas[entry.name[:-len(".json")]] = json.loads(entry.read_text("utf-8"))
        registry = Registry().with_resources(
            (schema["$id"], Resource.from_contents(schema)) for schema in schemas.values()
        )
        for name, schema in schemas.items():
            self._validators[name] = Draft202012Validator(schema, registry=registry)

    def validate(self, doc, schema_name: str) -> None:
        validator = self._validators.get(schema_name)
        if validator is None:
            raise SchemaViolation(f"no schema named {schema_name!r}")
        error = next(iter(validator.iter_errors(doc)), None)
        if error is not None:
            path = "/".join(str(p) for p in error.absolute_path) or "<root>"
            raise SchemaViolation(f"{schema_name}: {error.message} (at {path})")


class FileDocumentStore:
    """Atomic, schema-checked JSON documents under one root directory."""

    def __init__(self, root: Path, registry: SchemaRegistry | None = None):
        self.root = Path(root)
        self.registry = registry or SchemaRegistry()

    def path(self, rel: str) -> Path:
        return self.root / rel

    def exists(self, rel: str) -> bool:
        return self.path(rel).exists()

    def save(self, rel: str, doc, schema: str | None = None) -> None:
        if schema:
            self.registry.validate(doc, schema)
        atomic_write_json(self.path(rel), doc)

    def load(self, rel: str, schema: str | None = None):
        doc = read_json(self.path(rel))
        if schema:
            self.registry.validate(doc, schema)
        return doc


class LectureStore:
    """Lecture documents: record, deck files, agenda, queue, checkpoints."""

    def __init__(self, root: Path, registry: SchemaRegistry | None = None):
        self.docs = FileDocumentStore(Path(root), registry)
        self._lease_lock = threading.Lock()
        self._planning: set[str] = set()

    def _dir(self, lecture_id: str) -> str:
        return f"lectures/{lecture_id}"

    def _record_path(self, lecture_id: str) -> str:
        return f"{self._dir(lecture_id)}/record.json"

    def create(self, deck: SlideDeck, lecture_id: str | None = None) -> dict:
        lecture_id = lecture_id or f"lec-{uuid.uuid4().hex[:12]}"
        deck_dir = self.docs.path(f"{self._dir(lecture_id)}/deck")
        manifest = write_deck_files(deck, deck_dir)
        self.docs.save(f"{self._dir(lecture_id)}/deck/manifest.json", manifest, "deck_manifest")
        record = {
            "lecture_id": lecture_id,
            "title": deck.title,
            "status": "ingested",
            "deck_ref": "deck/manifest.json",
            "agenda_ref": None,
            "queue_ref": None,
        }
        self.docs.save(self._record_path(lecture_id), record, "lecture_record")
        return record

    def list_lectures(self) -> list[str]:
        base = self.docs.path("lectures")
        if not base.exists():
            return []
        return sorted(p.name for p in base.iterdir() if (p / "record.json").exists())

    def record(self, lecture_id: str) -> dict:
        if not self.docs.exists(self._record_path(lecture_id)):
            raise UnknownLecture(f"no lecture {lecture_id!r}")
        return self.docs.load(self._record_path(lecture_id), "lecture_record")

    def save_record(self, record: dict) -> None:
        self.docs.save(self._record_path(record["lecture_id"]), record, "lecture_record")

    def set_status(self, lecture_id: str, status: str) -> dict:
        record = self.record(lecture_id)
        old = STATUS_ORDER.index(record["status"])
        try:
            new = STATUS_ORDER.index(status)
        except ValueError:
            raise InvariantViolation(f"unknown status {status!r}") from None
        if new < old:
            raise InvariantViolation(
                f"status cannot move back from {record['status']} to {status}"
            )
        record["status"] = status
        self.save_record(record)
        return record

    def load_deck(self, lecture_id: str) -> SlideDeck:
        record = self.record(lecture_id)
        manifest = self.docs.load(f"{self._dir(lecture_id)}/{record['deck_ref']}", "deck_manifest")
        return deck_from_manifest(manifest, self.docs.path(f"{self._dir(lecture_id)}/deck"))

    def save_agenda(self, lecture_id: str, agenda: Agenda) -> None:
        self.docs.save(f"{self._dir(lecture_id)}/agenda.json", agenda_to_dict(agenda), "agenda")
        record = self.record(lecture_id)
        if record["agenda_ref"] is None:
            record["agenda_ref"] = "agenda.json"
            self.save_record(record)

    def load_agenda(self, lecture_id: str) -> Agenda:
        record = self.record(lecture_id)
        if not record["agenda_ref"]:
            raise UnknownLecture(f"lecture {lecture_id!r} has no agenda yet")
        doc = self.docs.load(f"{self._dir(lecture_id)}/{record['agenda_ref']}", "agenda")
        return agenda_from_dict(doc)

    def save_queue(self, lecture_id: str, queue: ActionQueue) -> None:
        self.docs.save(f"{self._dir(lecture_id)}/queue.json", queue.to_dict(), "action_queue")
        record = self.record(lecture_id)
        if record["queue_ref"] is None:
            record["queue_ref"] = "queue.json"
            self.save_record(record)

    def load_queue(self, lecture_id: str) -> ActionQueue:
        record = self.record(lecture_id)
        if not record["queue_ref"]:
            raise NoQueue(f"lecture {lecture_id!r} has no compiled queue")
        doc = self.docs.load(f"{self._dir(lecture_id)}/{record['queue_ref']}", "action_queue")
        return ActionQueue.from_dict(doc)

    def agenda_checkpoint(self, lecture_id: str) -> Path:
        return self.docs.path(f"{self._dir(lecture_id)}/agenda_checkpoint.json")

    def plan_checkpoint(self, lecture_id: str) -> Path:
        return self.docs.path(f"{self._dir(lecture_id)}/plan_checkpoint.json")

    def clear_checkpoints(self, lecture_id: str) -> None:
        for path in (self.agenda_checkpoint(lecture_id), self.plan_checkpoint(lecture_id)):
            if path.exists():
                path.unlink()

    def acquire_plan(self, lecture_id: str) -> None:
        with self._lease_lock:
            if lecture_id in self._planning:
                raise PlanInProgress(f"lecture {lecture_id!r} is already being planned")
            self._planning.add(lecture_id)

    def release_plan(self, lecture_id: str) -> None:
        with self._lease_lock:
            self._planning.discard(lecture_id)

    @contextmanager
    def plan_lease(self, lecture_id: str):
        """In-process guard: one planning run per lecture at a time."""
        self.acquire_plan(lecture_id)
        try:
            yield
        finally:
            self.release_plan(lecture_id)


class SessionStore:
    """One JSON document per session."""

    def __init__(self, root: Path, registry: SchemaRegistry | None = None):
        self.docs = FileDocumentStore(Path(root), registry)

    def _path(self, session_id: str) -> str:
        return f"sessions/{session_id}.json"

    def save(self, session: Session) -> None:
        self.docs.save(self._path(session.session_id), session.to_dict(), "session")

    def load(self, session_id: str) -> Session:
        if not self.docs.exists(self._path(session_id)):
            raise UnknownSession(f"no session {session_id!r}")
        return Session.from_dict(self.docs.load(self._path(session_id), "session"))

    def exists(self, session_id: str) -> bool:
        return self.docs.exists(self._path(session_id))


def envelopes(session: Session, from_seq: int = 0) -> list[dict]:
    """History as EventEnvelope dicts; seq is the utterance's history index,
    which makes the stream gapless by construction."""
    return [
        {"session_id": session.session_id, "seq": seq, "utterance": utt.to_dict()}
        for seq, utt in enumerate(session.history)
        if seq >= from_seq
    ]
