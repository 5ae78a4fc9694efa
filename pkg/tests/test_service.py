import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from slidetutor.config import AppConfig, GatewayConfig
from slidetutor.gateway import Gateway, ScriptedBackend
from slidetutor.service import create_app
from slidetutor.store import LectureStore

from conftest import FIXTURES
from pptxgen import build_pptx

TINY_PLAN_ENTRIES = [
    # one description per page
    "Alpha page opens the deck.",
    "Beta page continues the theme.",
    "Gamma page wraps things up.",
    # segmentation replies echo the running outline plus the new leaf
    "- Tiny Deck\n-- Basics\n--- Alpha page opens the deck.",
    "- Tiny Deck\n-- Basics\n--- Alpha page opens the deck.\n--- Beta page continues the theme.",
    "- Tiny Deck\n-- Basics\n--- Alpha page opens the deck.\n--- Beta page continues the theme.\n--- Gamma page wraps things up.",
    # one lecture script per page
    "Welcome, today we start with the Alpha page.",
    "Beta carries the idea forward.",
    "Gamma closes the loop.",
    # Basics has three leaves, so it gets one quiz call
    (
        "Question: Which page opens the deck? (single choice)\n"
        "A. Alpha\nB. Beta\nC. Gamma\n"
        "Answer: A\n"
        "Reference Text: Alpha page opens the deck."
    ),
]


def make_client(tmp_path, renderer_config, entries=()):
    normalized = [e if isinstance(e, dict) else {"text": e} for e in entries]
    backend = ScriptedBackend({"scenario": "service", "entries": normalized})
    gateway = Gateway(backend, GatewayConfig())
    config = AppConfig(data_dir=str(tmp_path), renderer=renderer_config)
    return TestClient(create_app(config, gateway=gateway)), backend


def upload(client, archive: bytes, title: str) -> str:
    response = client.post("/lectures", params={"title": title}, content=archive)
    assert response.status_code == 200, response.text
    return response.json()["lecture_id"]


# --- lecture lifecycle ------------------------------------------------------------

def test_healthz(tmp_path, renderer_config):
    client, _ = make_client(tmp_path, renderer_config)
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.text == "ok"


def test_upload_creates_ingested_record(tmp_path, renderer_config, tiny_archive):
    client, _ = make_client(tmp_path, renderer_config)
    response = client.post("/lectures", params={"title": "Tiny Deck"}, content=tiny_archive)
    record = response.json()
    assert record["status"] == "ingested"
    assert record["title"] == "Tiny Deck"
    assert client.get(f"/lectures/{record['lecture_id']}").json() == record


def test_upload_requires_title(tmp_path, renderer_config, tiny_archive):
    client, _ = make_client(tmp_path, renderer_config)
    assert client.post("/lectures", content=tiny_archive).status_code == 422


def test_upload_rejects_non_archive(tmp_path, renderer_config):
    client, _ = make_client(tmp_path, renderer_config)
    response = client.post("/lectures", params={"title": "X"}, content=b"not a zip")
    assert response.status_code == 422
    assert response.json()["error"] == "MalformedArchive"


def test_upload_rejects_empty_deck(tmp_path, renderer_config):
    client, _ = make_client(tmp_path, renderer_config)
    response = client.post("/lectures", params={"title": "X"}, content=build_pptx([]))
    assert response.status_code == 422
    assert response.json()["error"] == "EmptyDeck"


def test_unknown_lecture_is_404(tmp_path, renderer_config):
    client, _ = make_client(tmp_path, renderer_config)
    response = client.get("/lectures/ghost")
    assert response.status_code == 404
    assert response.json() == {
        "error": "UnknownLecture",
        "detail": response.json()["detail"],
    }
    assert "ghost" in response.json()["detail"]


def test_plan_waits_and_is_idempotent(tmp_path, renderer_config, tiny_archive):
    client, backend = make_client(tmp_path, renderer_config, TINY_PLAN_ENTRIES)
    lecture_id = upload(client, tiny_archive, "Tiny Deck")

    record = client.post(f"/lectures/{lecture_id}/plan").json()
    assert record["status"] == "planned"
    assert backend.remaining() == 0

    agenda = client.get(f"/lectures/{lecture_id}/agenda").json()
    assert agenda["leaf_count"] == 3
    assert agenda["root"]["label"] == "Tiny Deck"

    queue = client.get(f"/lectures/{lecture_id}/actions").json()
    kinds = [a["kind"] for a in queue["actions"]]
    assert kinds == ["ShowFile", "ReadScript"] * 3 + ["AskQuestion"]
    assert queue["revision"] == 1

    # planning again is a no-op; the drained backend proves no call was made
    assert client.post(f"/lectures/{lecture_id}/plan").json()["status"] == "planned"
    store = LectureStore(tmp_path)
    assert not store.agenda_checkpoint(lecture_id).exists()
    assert not store.plan_checkpoint(lecture_id).exists()


def test_agenda_and_actions_before_plan(tmp_path, renderer_config, tiny_archive):
    client, _ = make_client(tmp_path, renderer_config)
    lecture_id = upload(client, tiny_archive, "Tiny Deck")
    assert client.get(f"/lectures/{lecture_id}/agenda").status_code == 404
    response = client.get(f"/lectures/{lecture_id}/actions")
    assert response.status_code == 409
    assert response.json()["error"] == "NoQueue"


class GatedBackend:
    """Holds every completion until the gate opens; wraps a scripted backend."""

    def __init__(self, inner: ScriptedBackend, gate: threading.Event):
        self.inner = inner
        self.gate = gate

    def complete(self, request, timeout=None):
        assert self.gate.wait(timeout=10), "test gate never opened"
        return self.inner.complete(request, timeout=timeout)


def test_plan_in_background_with_conflict(tmp_path, renderer_config, tiny_archive):
    entries = [{"text": e} for e in TINY_PLAN_ENTRIES]
    gate = threading.Event()
    backend = GatedBackend(ScriptedBackend({"scenario": "bg", "entries": entries}), gate)
    config = AppConfig(data_dir=str(tmp_path), renderer=renderer_config)
    client = TestClient(create_app(config, gateway=Gateway(backend, GatewayConfig())))
    lecture_id = upload(client, tiny_archive, "Tiny Deck")

    record = client.post(f"/lectures/{lecture_id}/plan", params={"wait": "false"}).json()
    assert record["status"] == "ingested"

    conflict = client.post(f"/lectures/{lecture_id}/plan")
    assert conflict.status_code == 409
    assert conflict.json()["error"] == "PlanInProgress"

    gate.set()
    deadline = time.monotonic() + 10
    while time.monotonic() < deadline:
        status = client.get(f"/lectures/{lecture_id}").json()["status"]
        if status == "planned":
            break
        time.sleep(0.02)
    assert status == "planned"
    assert len(client.get(f"/lectures/{lecture_id}/actions").json()["actions"]) == 7


# --- queue edits -----------------------------------------------------------------

@pytest.fixture()
def planned(tmp_path, renderer_config, tiny_archive):
    client, backend = make_client(tmp_path, renderer_config, TINY_PLAN_ENTRIES)
    lecture_id = upload(client, tiny_archive, "Tiny Deck")
    client.post(f"/lectures/{lecture_id}/plan")
    return client, lecture_id


def test_patch_replaces_action_and_bumps_revision(planned):
    client, lecture_id = planned
    queue = client.get(f"/lectures/{lecture_id}/actions").json()
    target = dict(queue["actions"][1], value="Edited alpha narration.")
    response = client.patch(
        f"/lectures/{lecture_id}/actions",
        json={"revision": 1, "edits": [{"op": "replace", "position": 1, "action": target}]},
    )
    body = response.json()
    assert response.status_code == 200
    assert body["revision"] == 2
    assert body["actions"][1]["value"] == "Edited alpha narration."
    assert client.get(f"/lectures/{lecture_id}/actions").json() == body


def test_patch_stale_revision_conflicts(planned):
    client, lecture_id = planned
    queue = client.get(f"/lectures/{lecture_id}/actions").json()
    edit = {"op": "remove", "position": len(queue["actions"]) - 1}
    assert client.patch(
        f"/lectures/{lecture_id}/actions", json={"revision": 1, "edits": [edit]}
    ).status_code == 200
    stale = client.patch(
        f"/lectures/{lecture_id}/actions", json={"revision": 1, "edits": [edit]}
    )
    assert stale.status_code == 409
    assert stale.json()["error"] == "StaleRevision"
    assert client.get(f"/lectures/{lecture_id}/actions").json()["revision"] == 2


def test_patch_invalid_edit_leaves_queue_alone(planned):
    client, lecture_id = planned
    before = client.get(f"/lectures/{lecture_id}/actions").json()
    bad_page = dict(before["actions"][0], value=99)
    response = client.patch(
        f"/lectures/{lecture_id}/actions",
        json={"revision": 1, "edits": [{"op": "replace", "position": 0, "action": bad_page}]},
    )
    assert response.status_code == 422
    assert response.json()["error"] == "InvariantViolation"
    assert client.get(f"/lectures/{lecture_id}/actions").json() == before


def test_patch_rejects_showfile_after_its_script(planned):
    # moving a page flip behind its narration breaks queue ordering; the
    # error detail is part of the contract (clients display it verbatim)
    client, lecture_id = planned
    queue = client.get(f"/lectures/{lecture_id}/actions").json()
    show, read = queue["actions"][0], queue["actions"][1]
    response = client.patch(
        f"/lectures/{lecture_id}/actions",
        json={"revision": 1, "edits": [
            {"op": "replace", "position": 0, "action": read},
            {"op": "replace", "position": 1, "action": show},
        ]},
    )
    assert response.status_code == 422
    body = response.json()
    assert body["error"] == "InvariantViolation"
    assert body["detail"] == f"leaf {show['origin_leaf']}: ShowFile must precede ReadScript"


def test_patch_bad_position(planned):
    client, lecture_id = planned
    response = client.patch(
        f"/lectures/{lecture_id}/actions",
        json={"revision": 1, "edits": [{"op": "remove", "position": 99}]},
    )
    assert response.status_code == 422
    assert response.json()["error"] == "BadPosition"


def test_publish_requires_plan_then_sticks(planned):
    client, lecture_id = planned
    assert client.post(f"/lectures/{lecture_id}/publish").json()["status"] == "published"
    # publishing twice stays published
    assert client.post(f"/lectures/{lecture_id}/publish").json()["status"] == "published"


def test_publish_before_plan_conflicts(tmp_path, renderer_config, tiny_archive):
    client, _ = make_client(tmp_path, renderer_config)
    lecture_id = upload(client, tiny_archive, "Tiny Deck")
    response = client.post(f"/lectures/{lecture_id}/publish")
    assert response.status_code == 409
    assert response.json()["error"] == "NoQueue"


# --- sessions over the golden lecture ------------------------------------------------

@pytest.fixture(scope="module")
def golden_service(tmp_path_factory, renderer_config, plan_fixture, teach_fixture, user_events):
    """Full API run over the golden lecture: upload, plan, publish, one
    complete tutoring session driven by the scripted user events."""
    data_dir = tmp_path_factory.mktemp("svc")
    entries = list(plan_fixture["entries"]) + list(teach_fixture["entries"])
    backend = ScriptedBackend({"scenario": "golden-service", "entries": entries})
    config = AppConfig(data_dir=str(data_dir), renderer=renderer_config)
    client = TestClient(create_app(config, gateway=Gateway(backend, GatewayConfig())))

    archive = (FIXTURES / "golden_deck.pptx").read_bytes()
    lecture_id = upload(client, archive, "Intro to Machine Learning")
    client.post(f"/lectures/{lecture_id}/plan")
    client.post(f"/lectures/{lecture_id}/publish")

    created = client.post("/sessions", json={"lecture_id": lecture_id, "user_id": "student"})
    assert created.status_code == 200, created.text
    session_id = created.json()["session_id"]
    for event in user_events:
        response = client.post(f"/sessions/{session_id}/events", json=event)
        assert response.status_code == 200, response.text
    return {"client": client, "lecture_id": lecture_id, "session_id": session_id,
            "backend": backend}


def _strip(utterance: dict) -> dict:
    return {k: v for k, v in utterance.items() if k != "timestamp"}


def test_session_replays_golden_history(golden_service, golden_transcript_doc):
    client = golden_service["client"]
    body = client.get(f"/sessions/{golden_service['session_id']}/history").json()
    assert body["phase"] == "complete"
    got = [_strip(e["utterance"]) for e in body["events"]]
    want = [_strip(u) for u in golden_transcript_doc["history"]]
    assert got == want
    assert [e["seq"] for e in body["events"]] == list(range(len(want)))
    assert golden_service["backend"].remaining() == 0


def test_event_after_completion_conflicts(golden_service):
    client = golden_service["client"]
    response = client.post(
        f"/sessions/{golden_service['session_id']}/events", json={"type": "continue"}
    )
    assert response.status_code == 409
    assert response.json()["error"] == "NotAwaitingInput"


def test_session_requires_known_lecture_and_queue(golden_service, tmp_path, renderer_config,
                                                  tiny_archive):
    client = golden_service["client"]
    assert client.post("/sessions", json={"lecture_id": "ghost"}).status_code == 404

    fresh_client, _ = make_client(tmp_path, renderer_config)
    lecture_id = upload(fresh_client, tiny_archive, "Tiny Deck")
    response = fresh_client.post("/sessions", json={"lecture_id": lecture_id})
    assert response.status_code == 409
    assert response.json()["error"] == "NoQueue"


def test_unknown_session_endpoints_404(golden_service):
    client = golden_service["client"]
    assert client.get("/sessions/ghost/history").status_code == 404
    assert client.get("/sessions/ghost/stream").status_code == 404
    assert client.post("/sessions/ghost/events", json={"type": "continue"}).status_code == 404


def _parse_sse(text: str) -> list[tuple[int, dict]]:
    events = []
    for block in text.strip().split("\n\n"):
        if not block.strip():
            continue
        lines = block.split("\n")
        event_id = int(lines[0].removeprefix("id: "))
        payload = json.loads(lines[1].removeprefix("data: "))
        events.append((event_id, payload))
    return events


def test_stream_replays_full_history(golden_service):
    client = golden_service["client"]
    session_id = golden_service["session_id"]
    history = client.get(f"/sessions/{session_id}/history").json()["events"]
    events = _parse_sse(client.get(f"/sessions/{session_id}/stream").text)
    assert [event_id for event_id, _ in events] == [e["seq"] for e in history]
    assert [payload for _, payload in events] == history


def test_stream_resumes_from_query_and_header(golden_service):
    client = golden_service["client"]
    session_id = golden_service["session_id"]
    total = len(client.get(f"/sessions/{session_id}/history").json()["events"])

    tail = _parse_sse(client.get(f"/sessions/{session_id}/stream", params={"from": total - 5}).text)
    assert [event_id for event_id, _ in tail] == list(range(total - 5, total))

    # Last-Event-ID wins when it points past the query position
    resumed = _parse_sse(
        client.get(
            f"/sessions/{session_id}/stream",
            params={"from": total - 5},
            headers={"Last-Event-ID": str(total - 3)},
        ).text
    )
    assert [event_id for event_id, _ in resumed] == list(range(total - 2, total))


def test_stream_follow_terminates_when_complete(golden_service):
    client = golden_service["client"]
    session_id = golden_service["session_id"]
    history = client.get(f"/sessions/{session_id}/history").json()["events"]
    events = _parse_sse(
        client.get(f"/sessions/{session_id}/stream", params={"follow": "true"}).text
    )
    # the generator notices the finished session and stops instead of polling
    assert [payload for _, payload in events] == history


def test_bad_events_map_to_statuses(tmp_path, renderer_config, tiny_archive):
    client, _ = make_client(
        tmp_path, renderer_config,
        TINY_PLAN_ENTRIES + ["teacher", "Sure, here is more on Alpha."],
    )
    lecture_id = upload(client, tiny_archive, "Tiny Deck")
    client.post(f"/lectures/{lecture_id}/plan")
    session_id = client.post("/sessions", json={"lecture_id": lecture_id}).json()["session_id"]

    blank = client.post(f"/sessions/{session_id}/events", json={"type": "say", "text": "  "})
    assert blank.status_code == 409
    assert blank.json()["error"] == "NotAwaitingInput"

    outside = client.post(f"/sessions/{session_id}/events",
                          json={"type": "choose", "options": [0]})
    assert outside.status_code == 409

    unknown = client.post(f"/sessions/{session_id}/events", json={"type": "dance"})
    assert unknown.status_code == 409
