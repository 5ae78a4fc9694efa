"""Compile the agenda into the serialized queue of teaching actions.

Per leaf, in order: a ShowFile then a ReadScript. After a section's last
leaf: AskQuestion actions for every section whose flattened leaf count
reaches k, innermost section first.
"""

from __future__ import annotations

import re
from pathlib import Path

from . import prompts
from .actions import (
    ASK_QUESTION,
    MULTIPLE_CHOICE,
    READ_SCRIPT,
    SHOW_FILE,
    SINGLE_CHOICE,
    ActionQueue,
    QAItem,
    TeachingAction,
    validate_queue,
)
from .agenda import LEAF, SECTION, Agenda, AgendaNode, leaves
from .config import EngineConfig
from .deck import SlideDeck, page_content
from .errors import EmptyCompletion, InvariantViolation, NoValidQuestions, NotALeaf
from .gateway import Gateway, Message, make_request
from .jsonio import atomic_write_json, read_json

_OPTION_LINE = re.compile(r"^([A-F])[.):]\s*(\S.*?)\s*$")
_TYPE_MARKER = re.compile(r"\(\s*(single|multiple)[ _-]?choice\s*\)", re.IGNORECASE)


def parse_question_block(text: str) -> tuple[list[QAItem], list[str]]:
    """Parse 'Question:/A./Answer:/Reference Text:' blocks.

    Returns (valid items, per-block failure messages); a bad block never
    poisons its neighbours.
    """
    blocks: list[list[str]] = []
    current: list[str] | None = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.lower().startswith("question:"):
            current = [stripped]
            blocks.append(current)
        elif current is not None and stripped:
            current.append(stripped)

    items: list[QAItem] = []
    failures: list[str] = []
    for number, block in enumerate(blocks):
        try:
            items.append(_parse_block(block))
        except (ValueError, InvariantViolation) as exc:
            failures.append(f"block {number}: {exc}")
    return items, failures


def _parse_block(block: list[str]) -> QAItem:
    header = block[0][len("question:"):].strip()
    marker = _TYPE_MARKER.search(header)
    question_type = None
    if marker:
        question_type = SINGLE_CHOICE if marker.group(1).lower() == "single" else MULTIPLE_CHOICE
        header = (_TYPE_MARKER.sub("", header)).strip()
    if not header:
        raise ValueError("question text is empty")

    options: list[str] = []
    answer: set[int] | None = None
    reference_lines: list[str] = []
    in_reference = False
    for line in block[1:]:
        lowered = line.lower()
        if lowered.startswith("answer:"):
            in_reference = False
            letters = [ch for ch in line[len("answer:"):].upper() if "A" <= ch <= "F"]
            if not letters:
                raise ValueError(f"no answer letters in {line!r}")
            answer = {ord(ch) - ord("A") for ch in letters}
            continue
        if lowered.startswith("reference text:"):
            in_reference = True
            rest = line[len("reference text:"):].strip()
            if rest:
                reference_lines.append(rest)
            continue
        if in_reference:
            reference_lines.append(line)
            continue
        match = _OPTION_LINE.match(line)
        if match:
            slot = ord(match.group(1)) - ord("A")
            if slot != len(options):
                raise ValueError(f"option letters out of order at {line!r}")
            options.append(match.group(2))

    if answer is None:
        raise ValueError("block has no Answer line")
    if question_type is None:
        # tolerate a missing type marker: cardinality decides
        question_type = SINGLE_CHOICE if len(answer) == 1 else MULTIPLE_CHOICE
    item = QAItem(
        question=header,
        question_type=question_type,
        options=tuple(options),
        answer=frozenset(answer),
        reference=" ".join(reference_lines),
    )
    item.validate()
    return item


def plan_showfile(leaf: AgendaNode) -> TeachingAction:
    if leaf.kind != LEAF:
        raise NotALeaf(f"node {leaf.node_id} is a {leaf.kind}, not a leaf")
    return TeachingAction(kind=SHOW_FILE, value=leaf.page_index, origin_leaf=leaf.node_id)


def plan_readscript(
    leaf: AgendaNode,
    page,
    prev_scripts: list[str],
    gateway: Gateway,
) -> TeachingAction:
    """One gateway call writing the spoken script for a leaf's page."""
    if leaf.kind != LEAF:
        raise NotALeaf(f"node {leaf.node_id} is a {leaf.kind}, not a leaf")
    text, image = page_content(page)
    system = prompts.WRITE_SCRIPT_SYSTEM if prev_scripts else prompts.WRITE_SCRIPT_SYSTEM_FIRST
    prev_block = "\n\n".join(prev_scripts) or "(none)"
    user = prompts.WRITE_SCRIPT_USER.format(previous=prev_block, page_text=text)
    request = make_request(
        "planner", system, [Message(role="user", text=user, images=(image.data,))]
    )
    completion = gateway.complete(request)
    script = completion.text.strip()
    if not script:
        raise EmptyCompletion(f"script for page {page.index} came back empty")
    return TeachingAction(kind=READ_SCRIPT, value=script, origin_leaf=leaf.node_id)


def section_leaves(section: AgendaNode) -> list[AgendaNode]:
    found: list[AgendaNode] = []

    def walk(node: AgendaNode) -> None:
        if node.kind == LEAF:
            found.append(node)
        for child in node.children:
            walk(child)

    walk(section)
    return found


def plan_askquestion(
    section: AgendaNode,
    scripts_window: list[str],
    gateway: Gateway,
    questions_kept: int = 1,
) -> list[TeachingAction]:
    """One gateway call writing quiz items for a finished section."""
    last = section_leaves(section)
    if not last:
        raise NotALeaf(f"section {section.node_id} has no leaves")
    origin = last[-1].node_id
    user = prompts.WRITE_QUIZ_USER.format(scripts="\n\n".join(scripts_window))
    request = make_request(
        "planner", prompts.WRITE_QUIZ_SYSTEM, [Message(role="user", text=user)]
    )
    completion = gateway.complete(request)
    items, failures = parse_question_block(completion.text)
    if not items:
        raise NoValidQuestions(
            f"section {section.node_id}: no block survived ({'; '.join(failures) or 'no blocks'})"
        )
    return [
        TeachingAction(kind=ASK_QUESTION, value=item, origin_leaf=origin)
        for item in items[:questions_kept]
    ]


def _sections_post_order(agenda: Agenda) -> list[AgendaNode]:
    """Sections, children before parents, root excluded.

    Post-order puts inner sections first, so a leaf ending several nested
    sections hosts the innermost section's quiz first.
    """
    found: list[AgendaNode] = []

    def walk(node: AgendaNode) -> None:
        for child in node.children:
            walk(child)
        if node.kind == SECTION and node is not agenda.root:
            found.append(node)

    walk(agenda.root)
    return found


def compile_queue(
    agenda: Agenda,
    deck: SlideDeck,
    gateway: Gateway,
    config: EngineConfig | None = None,
    lecture_id: str | None = None,
    checkpoint_path: Path | None = None,
) -> ActionQueue:
    """Generate every action and flatten them into one validated queue.

    With checkpoint_path set, each finished script or quiz call is persisted,
    so a restarted compile re-issues no completed calls.
    """
    config = config or EngineConfig()
    lecture_id = lecture_id or deck.deck_id
    ordered_leaves = leaves(agenda)
    pages = {page.index: page for page in deck.pages}

    state: dict = {"scripts": [], "quizzes": {}}
    if checkpoint_path is not None and checkpoint_path.exists():
        state = read_json(checkpoint_path)

    def save() -> None:
        if checkpoint_path is not None:
            atomic_write_json(checkpoint_path, state)

    scripts: list[str] = list(state["scripts"])
    for leaf in ordered_leaves[len(scripts):]:
        prev = scripts[max(0, len(scripts) - config.k):]
        action = plan_readscript(leaf, pages[leaf.page_index], prev, gateway)
        scripts.append(action.value)
        state["scripts"] = scripts
        save()

    quiz_sections = [
        section for section in _sections_post_order(agenda)
        if len(section_leaves(section)) >= config.k
    ]
    quizzes: dict[str, list[dict]] = dict(state["quizzes"])
    for section in quiz_sections:
        if section.node_id in quizzes:
            continue
        last_index = section_leaves(section)[-1].page_index
        assert last_index is not None
        window = scripts[max(0, last_index - config.k): last_index + 1]
        actions = plan_askquestion(section, window, gateway, config.questions_kept)
        quizzes[section.node_id] = [action.to_dict() for action in actions]
        state["quizzes"] = quizzes
        save()

    per_leaf_questions: dict[str, list[TeachingAction]] = {}
    for section in quiz_sections:
        for doc in quizzes[section.node_id]:
            action = TeachingAction.from_dict(doc)
            per_leaf_questions.setdefault(action.origin_leaf, []).append(action)

    flattened: list[TeachingAction] = []
    for position, leaf in enumerate(ordered_leaves):
        flattened.append(plan_showfile(leaf))
        flattened.append(TeachingAction(
            kind=READ_SCRIPT, value=scripts[position], origin_leaf=leaf.node_id,
        ))
        flattened.extend(per_leaf_questions.get(leaf.node_id, []))

    queue = ActionQueue(lecture_id=lecture_id, actions=tuple(flattened), revision=1)
    validate_queue(queue, page_count=len(deck.pages))
    return queue
