"""Teaching actions and the serialized action queue.

Action kinds are an open tag set: the queue preserves kinds it does not
understand so custom actions survive revision and storage; only the teach
engine insists on a registered controller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .errors import BadPosition, InvariantViolation

SHOW_FILE = "ShowFile"
READ_SCRIPT = "ReadScript"
ASK_QUESTION = "AskQuestion"

SINGLE_CHOICE = "single_choice"
MULTIPLE_CHOICE = "multiple_choice"


@dataclass(frozen=True)
class QAItem:
    question: str
    question_type: str
    options: tuple[str, ...]
    answer: frozenset[int]
    reference: str = ""

    def validate(self) -> None:
        if not self.question.strip():
            raise InvariantViolation("question text is empty")
        if self.question_type not in (SINGLE_CHOICE, MULTIPLE_CHOICE):
            raise InvariantViolation(f"unknown question_type {self.question_type!r}")
        if not (2 <= len(self.options) <= 6):
            raise InvariantViolation(f"{len(self.options)} options outside the 2..6 range")
        for index in self.answer:
            if not (0 <= index < len(self.options)):
                raise InvariantViolation(f"answer index {index} out of range")
        if self.question_type == SINGLE_CHOICE and len(self.answer) != 1:
            raise InvariantViolation("single_choice must have exactly one answer")
        if not self.answer:
            raise InvariantViolation("answer set is empty")

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "question_type": self.question_type,
            "options": list(self.options),
            "answer": sorted(self.answer),
            "reference": self.reference,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QAItem":
        return cls(
            question=doc["question"],
            question_type=doc["question_type"],
            options=tuple(doc["options"]),
            answer=frozenset(doc["answer"]),
            reference=doc.get("reference", ""),
        )


@dataclass(frozen=True)
class TeachingAction:
    kind: str
    value: Any  # page index | script text | QAItem | opaque payload
    origin_leaf: str

    def to_dict(self) -> dict:
        value = self.value.to_dict() if isinstance(self.value, QAItem) else self.value
        return {"kind": self.kind, "value": value, "origin_leaf": self.origin_leaf}

    @classmethod
    def from_dict(cls, doc: dict) -> "TeachingAction":
        value = doc["value"]
        if doc["kind"] == ASK_QUESTION and isinstance(value, dict):
            value = QAItem.from_dict(value)
        return cls(kind=doc["kind"], value=value, origin_leaf=doc["origin_leaf"])


@dataclass(frozen=True)
class ActionQueue:
    lecture_id: str
    actions: tuple[TeachingAction, ...]
    revision: int = 1

    def to_dict(self) -> dict:
        return {
            "lecture_id": self.lecture_id,
            "revision": self.revision,
            "actions": [action.to_dict() for action in self.actions],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ActionQueue":
        return cls(
            lecture_id=doc["lecture_id"],
            actions=tuple(TeachingAction.from_dict(a) for a in doc["actions"]),
            revision=doc["revision"],
        )


def validate_queue(queue: ActionQueue, page_count: int | None = None) -> None:
    """Check every structural rule the queue is supposed to keep.

    Raises InvariantViolation on the first breach. Unknown action kinds pass
    through untouched; only their origin_leaf field is required.
    """
    last_page = -1
    positions: dict[str, dict[str, list[int]]] = {}
    for pos, action in enumerate(queue.actions):
        if not action.origin_leaf:
            raise InvariantViolation(f"action {pos} carries no origin_leaf")
        per_leaf = positions.setdefault(action.origin_leaf, {})
        per_leaf.setdefault(action.kind, []).append(pos)
        if action.kind == SHOW_FILE:
            page = action.value
            if not isinstance(page, int) or page < 0:
                raise InvariantViolation(f"ShowFile at {pos} has no page index")
            if page_count is not None and page >= page_count:
                raise InvariantViolation(
                    f"ShowFile at {pos} references page {page} of a {page_count}-page deck"
                )
            if page <= last_page:
                raise InvariantViolation(
                    f"ShowFile pages must strictly increase; {page} follows {last_page}"
                )
            last_page = page
        elif action.kind == READ_SCRIPT:
            if not isinstance(action.value, str) or not action.value.strip():
                raise InvariantViolation(f"ReadScript at {pos} has empty script text")
        elif action.kind == ASK_QUESTION:
            if not isinstance(action.value, QAItem):
                raise InvariantViolation(f"AskQuestion at {pos} payload is not a QAItem")
            action.value.validate()

    for leaf, per_kind in positions.items():
        shows = per_kind.get(SHOW_FILE, [])
        reads = per_kind.get(READ_SCRIPT, [])
        asks = per_kind.get(ASK_QUESTION, [])
        if shows and reads and max(shows) > min(reads):
            raise InvariantViolation(f"leaf {leaf}: ShowFile must precede ReadScript")
        if reads and asks and max(reads) > min(asks):
            raise InvariantViolation(f"leaf {leaf}: ReadScript must precede AskQuestion")
        if shows and asks and max(shows) > min(asks):
            raise InvariantViolation(f"leaf {leaf}: ShowFile must precede AskQuestion")


def revise_queue(
    queue: ActionQueue,
    edits: list[dict],
    page_count: int | None = None,
) -> ActionQueue:
    """Apply insert/remove/replace edits, revalidate, bump the revision.

    Edits apply in order against the evolving list; any failure rejects the
    whole batch and leaves the input queue untouched.
    """
    actions = list(queue.actions)
    for edit in edits:
        op = edit.get("op")
        position = edit.get("position")
        if not isinstance(position, int):
            raise BadPosition(f"edit carries no integer position: {edit!r}")
        if op == "insert":
            if not (0 <= position <= len(actions)):
                raise BadPosition(f"cannot insert at {position} in a {len(actions)}-long queue")
            actions.insert(position, TeachingAction.from_dict(edit["action"]))
        elif op == "remove":
            if not (0 <= position < len(actions)):
                raise BadPosition(f"cannot remove position {position}")
            del actions[position]
        elif op == "replace":
            if not (0 <= position < len(actions)):
                raise BadPosition(f"cannot replace position {position}")
            actions[position] = TeachingAction.from_dict(edit["action"])
        else:
            raise BadPosition(f"unknown edit op {op!r}")
    revised = ActionQueue(
        lecture_id=queue.lecture_id,
        actions=tuple(actions),
        revision=queue.revision + 1,
    )
    validate_queue(revised, page_count=page_count)
    return revised
