"""Tree-formed agenda construction: page descriptions, iterative
segmentation, and pruning of the prompt view.

The master tree keeps every leaf; pruning only shapes what the model sees.
Each segmentation step must extend the previous outline by exactly one new
leaf line (optionally under new section lines), otherwise it is re-asked and
finally falls back to a plain append.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from . import prompts
from .config import EngineConfig
from .deck import Page, SlideDeck, page_content
from .errors import EmptyCompletion, InvalidRevision, MalformedOutline, UnknownNode
from .gateway import Gateway, Message, make_request
from .jsonio import atomic_write_json, read_json

SECTION = "section"
LEAF = "leaf"

_OUTLINE_LINE = re.compile(r"^(-+) +(\S.*?)\s*$")


@dataclass(frozen=True)
class Description:
    page_index: int
    text: str


@dataclass
class AgendaNode:
    node_id: str
    label: str
    kind: str
    children: list["AgendaNode"] = field(default_factory=list)
    page_index: int | None = None


@dataclass
class Agenda:
    root: AgendaNode
    leaf_count: int = 0
    # monotone id counter, persisted so resumed builds never reuse an id
    next_seq: int = 1


def new_agenda(title: str) -> Agenda:
    if not title.strip():
        raise ValueError("agenda title must be non-empty")
    return Agenda(root=AgendaNode(node_id="n0", label=title.strip(), kind=SECTION))


def iter_nodes(agenda: Agenda) -> Iterator[tuple[AgendaNode, int]]:
    """Depth-first (node, depth) pairs; root has depth 1."""

    def walk(node: AgendaNode, depth: int) -> Iterator[tuple[AgendaNode, int]]:
        yield node, depth
        for child in node.children:
            yield from walk(child, depth + 1)

    yield from walk(agenda.root, 1)


def leaves(agenda: Agenda) -> list[AgendaNode]:
    return [node for node, _ in iter_nodes(agenda) if node.kind == LEAF]


def find_node(agenda: Agenda, node_id: str) -> AgendaNode:
    for node, _ in iter_nodes(agenda):
        if node.node_id == node_id:
            return node
    raise UnknownNode(f"no node {node_id!r} in agenda")


def path_to(agenda: Agenda, node_id: str) -> list[AgendaNode]:
    """Nodes from the root down to node_id, inclusive."""

    def walk(node: AgendaNode) -> list[AgendaNode] | None:
        if node.node_id == node_id:
            return [node]
        for child in node.children:
            tail = walk(child)
            if tail is not None:
                return [node] + tail
        return None

    path = walk(agenda.root)
    if path is None:
        raise UnknownNode(f"no node {node_id!r} in agenda")
    return path


def render_outline(agenda: Agenda, pruned_view: bool = False) -> str:
    """One line per node: depth dashes, a space, the label.

    Views and master trees render identically; folded sections in a view are
    simply childless and so occupy a single line, and leaves carry their
    description text as their label. The flag only documents intent.
    """
    del pruned_view
    lines = ["-" * depth + " " + node.label for node, depth in iter_nodes(agenda)]
    return "\n".join(lines)


def parse_outline(text: str) -> Agenda:
    """Parse a dash outline into an agenda; childless nodes become leaves.

    Leaf page indices are assigned in document order starting at 0.
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise MalformedOutline("outline is empty")

    agenda: Agenda | None = None
    stack: list[AgendaNode] = []  # stack[d-1] = current node at depth d
    seq = 0
    for line in lines:
        match = _OUTLINE_LINE.match(line)
        if not match:
            raise MalformedOutline(f"line is not a dash entry: {line!r}")
        depth = len(match.group(1))
        label = match.group(2)
        node = AgendaNode(node_id=f"n{seq}", label=label, kind=SECTION)
        seq += 1
        if depth == 1:
            if agenda is not None:
                raise MalformedOutline("outline has more than one root line")
            agenda = Agenda(root=node)
            stack = [node]
            continue
        if agenda is None:
            raise MalformedOutline("first line must have exactly one dash")
        if depth > len(stack) + 1:
            raise MalformedOutline(
                f"depth jumps from {len(stack)} to {depth} at line {line!r}"
            )
        stack = stack[: depth - 1]
        stack[-1].children.append(node)
        stack.append(node)

    assert agenda is not None
    page_index = 0
    for node, _ in iter_nodes(agenda):
        if node is agenda.root:
            continue
        if not node.children:
            node.kind = LEAF
            node.page_index = page_index
            page_index += 1
    agenda.leaf_count = page_index
    agenda.next_seq = seq
    return agenda


def prune(agenda: Agenda, new_leaf: str) -> Agenda:
    """View keeping the root-to-leaf path plus the direct siblings of every
    node on it; kept siblings are folded to a single line (children dropped).

    Node ids are shared with the master tree so merges can address them.
    """
    path = path_to(agenda, new_leaf)
    path_ids = {node.node_id for node in path}

    def build(node: AgendaNode) -> AgendaNode:
        clone = AgendaNode(
            node_id=node.node_id,
            label=node.label,
            kind=node.kind,
            page_index=node.page_index,
        )
        if node.node_id in path_ids:
            clone.children = [build(child) for child in node.children]
        return clone

    view_root = build(agenda.root)
    view = Agenda(root=view_root, next_seq=agenda.next_seq)
    view.leaf_count = len(leaves(view))
    return view


def _rightmost_path(agenda: Agenda) -> list[AgendaNode]:
    path = [agenda.root]
    while path[-1].children:
        path.append(path[-1].children[-1])
    return path


def _normalize_reply(text: str) -> list[str]:
    lines = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("```"):
            continue
        lines.append(stripped)
    return lines


def _parse_suffix(suffix: list[str]) -> list[tuple[int, str]]:
    parsed = []
    for line in suffix:
        match = _OUTLINE_LINE.match(line)
        if not match:
            raise InvalidRevision(f"appended line is not a dash entry: {line!r}")
        parsed.append((len(match.group(1)), match.group(2)))
    return parsed


def _append_chain(agenda: Agenda, attach_depth: int, section_labels: list[str],
                  leaf_desc: Description) -> Agenda:
    """Attach new sections + one leaf under the rightmost-path node at
    attach_depth - 1. Returns a new master; the input is left untouched."""
    master = copy.deepcopy(agenda)
    node = _rightmost_path(master)[attach_depth - 2]
    seq = master.next_seq
    for label in section_labels:
        child = AgendaNode(node_id=f"n{seq}", label=label, kind=SECTION)
        seq += 1
        node.children.append(child)
        node = child
    node.children.append(AgendaNode(
        node_id=f"n{seq}",
        label=leaf_desc.text,
        kind=LEAF,
        page_index=leaf_desc.page_index,
    ))
    master.next_seq = seq + 1
    master.leaf_count += 1
    return master


def _merge_reply(agenda_prev: Agenda, view: Agenda, reply: str, d_i: Description) -> Agenda:
    view_lines = render_outline(view).splitlines()
    reply_lines = _normalize_reply(reply)
    if reply_lines[: len(view_lines)] != view_lines:
        raise InvalidRevision("reply altered or dropped existing outline lines")
    suffix = _parse_suffix(reply_lines[len(view_lines):])
    if not suffix:
        raise InvalidRevision("reply appended no new line")
    first_depth = suffix[0][0]
    for offset, (depth, _) in enumerate(suffix):
        if depth != first_depth + offset:
            raise InvalidRevision("appended lines must deepen one level at a time")
    # the chain may only hang off a section on the rightmost path
    deepest = len(_rightmost_path(view))
    max_attach = deepest if view.leaf_count else deepest + 1
    if not (2 <= first_depth <= max_attach):
        raise InvalidRevision(
            f"appended line at depth {first_depth} attaches to no open section"
        )
    section_labels = [label for _, label in suffix[:-1]]
    # the leaf line's wording is advisory; the stored label is the description
    return _append_chain(agenda_prev, first_depth, section_labels, d_i)


def segment_step(
    agenda_prev: Agenda,
    d_i: Description,
    future: list[Description],
    gateway: Gateway,
    r_retries: int = 2,
) -> Agenda:
    """One segmentation round: ask for the extended outline, validate, merge.

    Invalid replies are re-asked up to r_retries times; after that the leaf is
    appended under the deepest open section.
    """
    existing = leaves(agenda_prev)
    if existing:
        view = prune(agenda_prev, existing[-1].node_id)
    else:
        view = copy.deepcopy(agenda_prev)
    future_text = "\n".join(f"- {d.text}" for d in future) or "(none)"
    user = prompts.SEGMENT_USER.format(
        outline=render_outline(view),
        description=d_i.text,
        future=future_text,
    )
    request = make_request("planner", prompts.SEGMENT_SYSTEM, [Message(role="user", text=user)])
    for _ in range(1 + r_retries):
        completion = gateway.complete(request)
        try:
            merged = _merge_reply(agenda_prev, view, completion.text, d_i)
        except InvalidRevision:
            continue
        indices = [leaf.page_index for leaf in leaves(merged)]
        assert indices == sorted(indices), "merge broke leaf order"
        return merged
    # fallback: plain append under the parent of the last leaf (or the root)
    attach_depth = len(_rightmost_path(agenda_prev)) if existing else 2
    return _append_chain(agenda_prev, attach_depth, [], d_i)


def generate_description(
    page: Page,
    prev: list[Description],
    gateway: Gateway,
    cap: int = 512,
) -> Description:
    """One gateway call describing a page, given up to k prior descriptions."""
    text, image = page_content(page)
    prev_block = "\n".join(f"- {d.text}" for d in prev) or "(none)"
    user = prompts.DESCRIBE_PAGE_USER.format(previous=prev_block, page_text=text)
    request = make_request(
        "planner",
        prompts.DESCRIBE_PAGE_SYSTEM,
        [Message(role="user", text=user, images=(image.data,))],
    )
    completion = gateway.complete(request)
    # descriptions must fit on one outline line
    flattened = " ".join(completion.text.split())
    if not flattened:
        raise EmptyCompletion(f"description for page {page.index} came back empty")
    return Description(page_index=page.index, text=flattened[:cap])


# --- serialization -----------------------------------------------------------

def _node_to_dict(node: AgendaNode) -> dict:
    doc: dict = {"node_id": node.node_id, "label": node.label, "kind": node.kind}
    if node.kind == LEAF:
        doc["page_index"] = node.page_index
    else:
        doc["children"] = [_node_to_dict(child) for child in node.children]
    return doc


def _node_from_dict(doc: dict) -> AgendaNode:
    if doc["kind"] == LEAF:
        return AgendaNode(
            node_id=doc["node_id"],
            label=doc["label"],
            kind=LEAF,
            page_index=doc["page_index"],
        )
    return AgendaNode(
        node_id=doc["node_id"],
        label=doc["label"],
        kind=SECTION,
        children=[_node_from_dict(child) for child in doc.get("children", [])],
    )


def agenda_to_dict(agenda: Agenda) -> dict:
    return {
        "root": _node_to_dict(agenda.root),
        "leaf_count": agenda.leaf_count,
        "next_seq": agenda.next_seq,
    }


def agenda_from_dict(doc: dict) -> Agenda:
    return Agenda(
        root=_node_from_dict(doc["root"]),
        leaf_count=doc["leaf_count"],
        next_seq=doc["next_seq"],
    )


# --- full build with resumable checkpoints ------------------------------------

def build_agenda(
    deck: SlideDeck,
    gateway: Gateway,
    config: EngineConfig | None = None,
    checkpoint_path: Path | None = None,
    on_described=None,
) -> Agenda:
    """Describe every page, then thread each page into the tree in order.

    With checkpoint_path set, progress is written after every model step, so
    a restarted build re-issues no completed calls. on_described fires once
    when the description phase is complete (callers surface it as progress).
    """
    config = config or EngineConfig()
    state = {"descriptions": [], "agenda": None, "segmented": 0}
    if checkpoint_path is not None and checkpoint_path.exists():
        state = read_json(checkpoint_path)

    descriptions = [Description(d["page_index"], d["text"]) for d in state["descriptions"]]

    def save() -> None:
        if checkpoint_path is None:
            return
        atomic_write_json(checkpoint_path, {
            "descriptions": [
                {"page_index": d.page_index, "text": d.text} for d in descriptions
            ],
            "agenda": agenda_to_dict(agenda) if agenda is not None else None,
            "segmented": segmented,
        })

    agenda = agenda_from_dict(state["agenda"]) if state["agenda"] else None
    segmented = state["segmented"]

    for page in deck.pages[len(descriptions):]:
        prev = descriptions[max(0, page.index - config.k): page.index]
        descriptions.append(generate_description(page, prev, gateway, cap=config.description_cap))
        save()
    if on_described is not None:
        on_described()

    if agenda is None:
        agenda = new_agenda(deck.title)
        save()
    for i in range(segmented, len(deck.pages)):
        future = descriptions[i + 1: i + 1 + config.k]
        agenda = segment_step(agenda, descriptions[i], future, gateway, r_retries=config.r_retries)
        segmented = i + 1
        save()
    return agenda
