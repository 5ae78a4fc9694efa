"""Interactive session engine: scene controllers, agent roster, grading.

Execution is broken into micro-steps so the service can persist after each
one; a step makes at most one gateway call, and the call happens before any
session mutation, so a failed call leaves the session exactly as it was.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from typing import Callable

from . import prompts
from .actions import ASK_QUESTION, READ_SCRIPT, SHOW_FILE, ActionQueue, QAItem, TeachingAction
from .config import EngineConfig
from .errors import (
    BadIndex,
    NoPendingStep,
    NoQueue,
    NotAwaitingInput,
    UnknownActionKind,
)
from .gateway import Gateway, Message, make_request, request_hash

# phases
RUNNING = "running"
AWAITING_USER = "awaiting_user"
AWAITING_SOLUTION = "awaiting_solution"
COMPLETE = "complete"

# micro-step kinds
START_ACTION = "start_action"
RS_SELECT = "rs_select"
RS_RESPOND = "rs_respond"
AQ_EXPLAIN = "aq_explain"

TEACHER = "teacher"
TEACHING_ASSISTANT = "teaching_assistant"
SYSTEM = "system"
USER = "user"


@dataclass(frozen=True)
class Utterance:
    speaker: str  # user | teacher | teaching_assistant | system
    content: str
    kind: str  # say | show_page | post_question | explanation | control
    timestamp: float
    payload: dict | None = None  # page reference / quiz body / submission

    def to_dict(self) -> dict:
        doc = {
            "speaker": self.speaker,
            "content": self.content,
            "kind": self.kind,
            "timestamp": self.timestamp,
        }
        if self.payload is not None:
            doc["payload"] = self.payload
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Utterance":
        return cls(
            speaker=doc["speaker"],
            content=doc["content"],
            kind=doc["kind"],
            timestamp=doc["timestamp"],
            payload=doc.get("payload"),
        )


@dataclass(frozen=True)
class AgentRole:
    name: str
    description: str  # one line shown to the scene controller
    prompt_template: str  # system prompt with a {context} slot


@dataclass(frozen=True)
class ControllerDecision:
    choice: str  # roster name | "user" | "terminate"
    fallback: bool = False


def default_roster() -> dict[str, AgentRole]:
    return {
        TEACHER: AgentRole(
            name=TEACHER,
            description="the lecturer; answers questions about the lecture content",
            prompt_template=prompts.TEACHER_SYSTEM,
        ),
        TEACHING_ASSISTANT: AgentRole(
            name=TEACHING_ASSISTANT,
            description="handles greetings, small talk, and anything off-topic or unsafe",
            prompt_template=prompts.ASSISTANT_SYSTEM,
        ),
    }


@dataclass
class Session:
    session_id: str
    lecture_id: str
    user_id: str
    cursor: int = 0
    phase: str = RUNNING
    pending_step: str | None = START_ACTION
    history: list[Utterance] = field(default_factory=list)
    step_log: list[dict] = field(default_factory=list)
    action_state: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "lecture_id": self.lecture_id,
            "user_id": self.user_id,
            "cursor": self.cursor,
            "phase": self.phase,
            "pending_step": self.pending_step,
            "history": [u.to_dict() for u in self.history],
            "step_log": self.step_log,
            "action_state": self.action_state,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Session":
        return cls(
            session_id=doc["session_id"],
            lecture_id=doc["lecture_id"],
            user_id=doc["user_id"],
            cursor=doc["cursor"],
            phase=doc["phase"],
            pending_step=doc["pending_step"],
            history=[Utterance.from_dict(u) for u in doc["history"]],
            step_log=list(doc["step_log"]),
            action_state=dict(doc["action_state"]),
        )


def wall_clock(session: Session) -> float:
    del session
    return time.time()


def history_clock(session: Session) -> float:
    """Deterministic timestamps for golden transcripts: count of utterances."""
    return float(len(session.history))


def grade_answer(qa: QAItem, submission: set[int]) -> str:
    """Exact-set grading: correct iff the submission equals the answer set."""
    for index in submission:
        if not (0 <= index < len(qa.options)):
            raise BadIndex(f"option index {index} out of range for {len(qa.options)} options")
    return "correct" if set(submission) == set(qa.answer) else "incorrect"


def _letters(indices) -> str:
    return ", ".join(chr(ord("A") + i) for i in sorted(indices))


def _history_messages(history: list[Utterance], h_window: int) -> list[Message]:
    trimmed = history[-h_window:]
    out = []
    for utt in trimmed:
        role = "user" if utt.speaker == USER else "assistant"
        text = utt.content if utt.speaker == USER else f"{utt.speaker}: {utt.content}"
        out.append(Message(role=role, text=text))
    return out


def select_speaker(
    history: list[Utterance],
    roster: dict[str, AgentRole],
    gateway: Gateway,
    h_window: int = 12,
) -> ControllerDecision:
    """One controller call deciding who acts next; never raises on odd replies.

    Replies naming the system agent mean the action is over, so they map to
    terminate; anything unrecognizable falls back to the teacher.
    """
    roster_lines = [f"- {role.name}: {role.description}" for role in roster.values()]
    roster_lines.append("- user: wait, the student should speak next")
    roster_lines.append("- system: nothing needs a reply, move the lecture forward")
    system = prompts.CONTROLLER_SYSTEM.format(roster="\n".join(roster_lines))
    transcript = "\n".join(
        f"{utt.speaker}: {utt.content}" for utt in history[-h_window:]
    )
    request = make_request(
        "tutor", system, [Message(role="user", text=prompts.CONTROLLER_USER.format(history=transcript))]
    )
    completion = gateway.complete(request)

    lowered = completion.text.lower()
    candidates = list(roster) + [USER, SYSTEM, "terminate"]
    hits = []
    for name in candidates:
        position = lowered.find(name.replace("_", " "))
        if position < 0:
            position = lowered.find(name)
        if position >= 0:
            hits.append((position, name))
    if not hits:
        return ControllerDecision(choice=TEACHER, fallback=True)
    hits.sort()
    choice = hits[0][1]
    if choice == SYSTEM:
        choice = "terminate"
    return ControllerDecision(choice=choice)


def agent_respond(
    role: AgentRole,
    history: list[Utterance],
    injected: str | None,
    gateway: Gateway,
    h_window: int = 12,
    kind: str = "say",
    clock: Callable[[Session], float] | None = None,
    session: Session | None = None,
) -> Utterance:
    """One gateway call as the given agent; injected context fills the
    system-prompt slot and never appears in visible history."""
    system = role.prompt_template.format(context=injected or "(none)")
    request = make_request("tutor", system, _history_messages(history, h_window))
    completion = gateway.complete(request)
    if clock is not None and session is not None:
        stamp = clock(session)
    else:
        stamp = time.time()
    return Utterance(
        speaker=role.name, content=completion.text.strip(), kind=kind, timestamp=stamp
    )


class TutoringEngine:
    """Binds a compiled queue, a gateway, and a roster into a step executor.

    Controllers are registered per action kind; kinds without a controller
    are rejected when a session reaches them.
    """

    def __init__(
        self,
        queue: ActionQueue,
        gateway: Gateway,
        roster: dict[str, AgentRole] | None = None,
        config: EngineConfig | None = None,
        clock: Callable[[Session], float] = wall_clock,
    ):
        self.queue = queue
        self.gateway = gateway
        self.roster = roster or default_roster()
        self.config = config or EngineConfig()
        self.clock = clock
        self._controllers: dict[str, Callable] = {
            SHOW_FILE: TutoringEngine._step_showfile,
            READ_SCRIPT: TutoringEngine._step_readscript,
            ASK_QUESTION: TutoringEngine._step_askquestion,
        }

    def register_controller(self, kind: str, controller: Callable) -> None:
        """controller(engine, session, action) -> list[Utterance]"""
        self._controllers[kind] = controller

    # --- session lifecycle ----------------------------------------------

    def start_session(self, lecture_id: str, user_id: str, session_id: str | None = None) -> Session:
        if not self.queue.actions:
            raise NoQueue(f"lecture {lecture_id} has no compiled actions")
        return Session(
            session_id=session_id or f"s-{uuid.uuid4().hex[:12]}",
            lecture_id=lecture_id,
            user_id=user_id,
        )

    def run_step(self, session: Session) -> tuple[list[Utterance], Session]:
        if session.phase == COMPLETE or session.pending_step is None:
            raise NoPendingStep(f"session {session.session_id} has no pending step")
        action = self.queue.actions[session.cursor]
        controller = self._controllers.get(action.kind)
        if controller is None:
            raise UnknownActionKind(f"no controller registered for kind {action.kind!r}")
        before = len(session.history)
        step_kind = session.pending_step
        action_index = session.cursor
        done_before = self._completed_calls()
        controller(self, session, action)
        events = session.history[before:]
        calls = self._completed_calls() - done_before
        digest = self.gateway.log_records[-1]["request_hash"] if calls else None
        session.step_log.append({
            "seq": len(session.step_log),
            "step": step_kind,
            "action_index": action_index,
            "gateway_calls": calls,
            "request_hash": digest,
        })
        return events, session

    def _completed_calls(self) -> int:
        # retry attempts add log records too; only consumed completions count
        return sum(1 for record in self.gateway.log_records if record["status"] == "ok")

    def run_pending(self, session: Session) -> list[Utterance]:
        """Drain auto-steps until the session waits for the user or ends."""
        events: list[Utterance] = []
        while session.pending_step is not None and session.phase != COMPLETE:
            step_events, _ = self.run_step(session)
            events.extend(step_events)
        return events

    def submit_user_event(self, session: Session, event: dict) -> Session:
        """Append a user utterance and schedule the follow-up step.

        Accepted shapes: {"type": "say", "text": ...},
        {"type": "choose", "options": [indices]}, {"type": "continue"}.
        """
        if session.phase not in (AWAITING_USER, AWAITING_SOLUTION):
            raise NotAwaitingInput(
                f"session {session.session_id} is {session.phase}, not awaiting input"
            )
        etype = event.get("type")
        if etype == "continue":
            # universal skip: ends the active action no matter its kind
            self._append(session, USER, "continue", "control")
            self._advance(session)
        elif etype == "say":
            text = str(event.get("text", "")).strip()
            if not text:
                raise NotAwaitingInput("say event carries no text")
            self._append(session, USER, text, "say")
            if session.phase == AWAITING_SOLUTION:
                # a question about the quiz: explain without grading
                session.action_state["submission"] = None
                session.pending_step = AQ_EXPLAIN
            else:
                session.pending_step = RS_SELECT
            session.phase = RUNNING
        elif etype == "choose":
            if session.phase != AWAITING_SOLUTION:
                raise NotAwaitingInput("choose is only valid while a question is open")
            action = self.queue.actions[session.cursor]
            qa: QAItem = action.value
            picked = event.get("options", [])
            if not picked or not all(isinstance(i, int) for i in picked):
                raise BadIndex(f"choose needs integer option indices, got {picked!r}")
            if qa.question_type == "single_choice" and len(picked) != 1:
                raise BadIndex("this question takes exactly one option")
            verdict = grade_answer(qa, set(picked))
            self._append(
                session, USER, f"answer: {_letters(picked)}", "say",
                payload={"selected": sorted(picked)},
            )
            session.action_state["submission"] = sorted(picked)
            session.action_state["verdict"] = verdict
            session.pending_step = AQ_EXPLAIN
            session.phase = RUNNING
        else:
            raise NotAwaitingInput(f"unknown event type {etype!r}")
        return session

    # --- controllers ------------------------------------------------------

    def _step_showfile(self, session: Session, action: TeachingAction) -> None:
        # no model involved: flip the page and terminate the action
        self._append(
            session, SYSTEM, f"page {action.value}", "show_page",
            payload={"page_index": action.value},
        )
        self._advance(session)

    def _step_readscript(self, session: Session, action: TeachingAction) -> None:
        step = session.pending_step
        if step == START_ACTION:
            # the planned script is delivered untouched, byte for byte
            self._append(session, TEACHER, action.value, "say")
            session.phase = AWAITING_USER
            session.pending_step = None
        elif step == RS_SELECT:
            decision = select_speaker(
                session.history, self.roster, self.gateway, self.config.h_window
            )
            if decision.fallback:
                misses = session.action_state.get("fallbacks", 0) + 1
                session.action_state["fallbacks"] = misses
                if misses >= 2:
                    self._advance(session)
                    return
            else:
                session.action_state["fallbacks"] = 0
            if decision.choice == "terminate":
                self._advance(session)
            elif decision.choice == USER:
                session.phase = AWAITING_USER
                session.pending_step = None
            else:
                session.action_state["respondent"] = decision.choice
                session.pending_step = RS_RESPOND
        elif step == RS_RESPOND:
            role = self.roster[session.action_state.get("respondent", TEACHER)]
            utterance = agent_respond(
                role, session.history, action.value, self.gateway,
                self.config.h_window, kind="say", clock=self.clock, session=session,
            )
            session.history.append(utterance)
            session.phase = AWAITING_USER
            session.pending_step = None
        else:
            raise NoPendingStep(f"ReadScript cannot run step {step!r}")

    def _step_askquestion(self, session: Session, action: TeachingAction) -> None:
        step = session.pending_step
        qa: QAItem = action.value
        if step == START_ACTION:
            # question text is delivered untouched; options ride in the payload
            self._append(
                session, TEACHER, qa.question, "post_question", payload=qa.to_dict()
            )
            session.phase = AWAITING_SOLUTION
            session.pending_step = None
        elif step == AQ_EXPLAIN:
            submission = session.action_state.get("submission")
            notes = prompts.TEACHER_QUIZ_NOTES.format(
                question=qa.question,
                answer=f"{_letters(qa.answer)} "
                       f"({'; '.join(qa.options[i] for i in sorted(qa.answer))})",
                reference=qa.reference or "(not provided)",
            )
            injected = (
                "The class is answering a quiz question." + notes
                if submission is None
                else f"The student answered {_letters(submission)} "
                     f"({session.action_state.get('verdict', 'ungraded')})." + notes
            )
            role = self.roster[TEACHER]
            utterance = agent_respond(
                role, session.history, injected, self.gateway,
                self.config.h_window, kind="explanation", clock=self.clock, session=session,
            )
            session.history.append(utterance)
            if submission is None:
                # a hint was asked for; the question stays open
                session.phase = AWAITING_SOLUTION
                session.pending_step = None
            else:
                self._advance(session)
        else:
            raise NoPendingStep(f"AskQuestion cannot run step {step!r}")

    # --- internals ----------------------------------------------------------

    def _append(
        self, session: Session, speaker: str, content: str, kind: str,
        payload: dict | None = None,
    ) -> None:
        session.history.append(Utterance(
            speaker=speaker,
            content=content,
            kind=kind,
            timestamp=self.clock(session),
            payload=payload,
        ))

    def _advance(self, session: Session) -> None:
        session.cursor += 1
        session.action_state = {}
        if session.cursor >= len(self.queue.actions):
            session.phase = COMPLETE
            session.pending_step = None
        else:
            session.phase = RUNNING
            session.pending_step = START_ACTION
