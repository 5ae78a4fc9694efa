import json

import httpx
import pytest

from slidetutor.config import GatewayConfig, load_config
from slidetutor.errors import (
    AssertionFailed,
    BackendRejected,
    EmptyCompletion,
    FixtureExhausted,
    InvalidRequest,
    RetriesExhausted,
    Timeout,
    TransientBackendError,
)
from slidetutor.gateway import (
    MAX_IMAGE_BYTES,
    PROFILES,
    Gateway,
    HttpBackend,
    Message,
    ModelCompletion,
    ModelRequest,
    ScriptedBackend,
    Usage,
    make_request,
    request_hash,
)

from conftest import scripted_gateway


# --- request assembly and validation -------------------------------------------

def test_profiles_table():
    planner = PROFILES["planner"]
    assert (planner.max_tokens, planner.temperature, planner.top_p, planner.n) == (
        4096, 1.0, 1.0, 1,
    )
    tutor = PROFILES["tutor"]
    assert (tutor.max_tokens, tutor.temperature, tutor.top_p, tutor.n) == (
        1024, 0.95, 0.7, 1,
    )
    assert set(PROFILES) == {"planner", "tutor"}


def test_make_request_uses_profile_defaults():
    request = make_request("tutor", "be helpful", [Message(role="user", text="hi")])
    assert request.params == PROFILES["tutor"]
    assert request.messages[0].role == "system"
    request.validate()


def test_make_request_overrides_params():
    request = make_request("planner", "sys", [], max_tokens=16, temperature=0.0)
    assert request.params.max_tokens == 16
    assert request.params.temperature == 0.0
    assert request.params.top_p == PROFILES["planner"].top_p


@pytest.mark.parametrize(
    "request_builder",
    [
        lambda: ModelRequest("nope", (Message("system", "s"),), PROFILES["planner"]),
        lambda: ModelRequest("planner", (Message("user", "u"),), PROFILES["planner"]),
        lambda: ModelRequest(
            "planner",
            (Message("system", "a"), Message("system", "b")),
            PROFILES["planner"],
        ),
        lambda: ModelRequest(
            "planner",
            (Message("system", "s"), Message("oracle", "u")),
            PROFILES["planner"],
        ),
        lambda: ModelRequest(
            "planner",
            (Message("system", "s"), Message("assistant", "a", images=(b"png",))),
            PROFILES["planner"],
        ),
        lambda: ModelRequest(
            "planner",
            (Message("system", "s"), Message("user", "u", images=(b"x" * (MAX_IMAGE_BYTES + 1),))),
            PROFILES["planner"],
        ),
    ],
)
def test_request_validation_rejects(request_builder):
    with pytest.raises(InvalidRequest):
        request_builder().validate()


def test_request_hash_is_stable_and_sensitive():
    a = make_request("planner", "sys", [Message(role="user", text="hello")])
    b = make_request("planner", "sys", [Message(role="user", text="hello")])
    c = make_request("planner", "sys", [Message(role="user", text="other")])
    d = make_request("planner", "sys", [Message(role="user", text="hello", images=(b"img",))])
    assert request_hash(a) == request_hash(b)
    assert len(request_hash(a)) == 16
    assert request_hash(a) != request_hash(c)
    assert request_hash(a) != request_hash(d)


# --- retry policy and call log ---------------------------------------------------

class FlakyBackend:
    def __init__(self, failures, text="fine"):
        self.failures = list(failures)
        self.text = text
        self.calls = 0

    def complete(self, request, timeout):
        self.calls += 1
        if self.failures:
            raise self.failures.pop(0)
        return ModelCompletion(text=self.text, usage=Usage(3, 5))


def _gateway(backend, **config):
    sleeps = []
    gateway = Gateway(
        backend,
        GatewayConfig(**config),
        clock=lambda: 0.0,
        sleep=sleeps.append,
    )
    return gateway, sleeps


REQUEST = make_request("planner", "sys", [Message(role="user", text="go")])


def test_retries_transient_errors_with_backoff():
    backend = FlakyBackend([TransientBackendError("hiccup"), Timeout("slow")])
    gateway, sleeps = _gateway(backend)
    completion = gateway.complete(REQUEST)
    assert completion.text == "fine"
    assert backend.calls == 3
    assert sleeps == [0.5, 1.0]
    assert [r["status"] for r in gateway.log_records] == [
        "TransientBackendError", "Timeout", "ok",
    ]
    assert gateway.log_records[-1]["usage"] == {"prompt_tokens": 3, "completion_tokens": 5}


def test_retries_exhausted_after_attempts():
    backend = FlakyBackend([TransientBackendError(f"fail {i}") for i in range(5)])
    gateway, sleeps = _gateway(backend, attempts=3)
    with pytest.raises(RetriesExhausted) as excinfo:
        gateway.complete(REQUEST)
    assert backend.calls == 3
    assert len(sleeps) == 2
    assert "fail 2" in str(excinfo.value)
    assert [r["status"] for r in gateway.log_records] == ["TransientBackendError"] * 3


def test_rejection_is_not_retried():
    backend = FlakyBackend([BackendRejected("no such model")])
    gateway, sleeps = _gateway(backend)
    with pytest.raises(BackendRejected):
        gateway.complete(REQUEST)
    assert backend.calls == 1 and sleeps == []
    assert [r["status"] for r in gateway.log_records] == ["rejected"]


def test_empty_stop_completion_is_an_error():
    gateway, _ = _gateway(FlakyBackend([], text="   \n"))
    with pytest.raises(EmptyCompletion):
        gateway.complete(REQUEST)
    assert [r["status"] for r in gateway.log_records] == ["empty"]


def test_truncated_empty_completion_passes_through():
    class Truncating:
        def complete(self, request, timeout):
            return ModelCompletion(text="", finish_reason="length")

    gateway = Gateway(Truncating(), GatewayConfig(), sleep=lambda s: None)
    assert gateway.complete(REQUEST).finish_reason == "length"


def test_every_backend_call_is_logged_before_results_are_visible():
    backend = FlakyBackend([TransientBackendError("x")])
    gateway, _ = _gateway(backend)
    gateway.complete(REQUEST)
    assert len(gateway.log_records) == backend.calls == 2
    digest = request_hash(REQUEST)
    assert all(r["request_hash"] == digest for r in gateway.log_records)


def test_log_file_receives_jsonl(tmp_path):
    log_path = tmp_path / "calls" / "gateway.jsonl"
    gateway = Gateway(
        FlakyBackend([]),
        GatewayConfig(log_path=str(log_path)),
        clock=lambda: 7.0,
        sleep=lambda s: None,
    )
    gateway.complete(REQUEST)
    gateway.complete(REQUEST)
    lines = log_path.read_text().splitlines()
    assert len(lines) == 2
    for line in lines:
        record = json.loads(line)
        assert record["status"] == "ok" and record["timestamp"] == 7.0


def test_invalid_request_never_reaches_backend():
    backend = FlakyBackend([])
    gateway, _ = _gateway(backend)
    bad = ModelRequest("planner", (Message("user", "no system"),), PROFILES["planner"])
    with pytest.raises(InvalidRequest):
        gateway.complete(bad)
    assert backend.calls == 0 and gateway.log_records == []


# --- scripted backend --------------------------------------------------------------

def test_scripted_backend_plays_in_order():
    gateway = scripted_gateway(["one", "two"])
    assert gateway.complete(REQUEST).text == "one"
    assert gateway.complete(REQUEST).text == "two"
    assert gateway.backend.remaining() == 0
    with pytest.raises(FixtureExhausted):
        gateway.complete(REQUEST)


def test_scripted_backend_records_requests():
    gateway = scripted_gateway(["one"])
    gateway.complete(REQUEST)
    assert gateway.backend.calls == [REQUEST]


@pytest.mark.parametrize(
    "expect",
    [
        {"profile": "tutor"},
        {"history": 3},
        {"max_history": 0},
        {"images": 2},
        {"contains": ["absent needle"]},
        {"not_contains": ["go"]},
        {"system_contains": ["go"]},  # "go" is in the user turn, not the system
    ],
)
def test_scripted_backend_expectation_failures(expect):
    backend = ScriptedBackend({"scenario": "s", "entries": [{"text": "x", "expect": expect}]})
    with pytest.raises(AssertionFailed):
        backend.complete(REQUEST, timeout=1)
    # a failed expectation does not consume the entry
    assert backend.remaining() == 1


def test_scripted_backend_expectations_pass():
    expect = {
        "profile": "planner",
        "history": 1,
        "max_history": 1,
        "images": 0,
        "contains": ["go", "sys"],
        "not_contains": ["absent"],
        "system_contains": ["sys"],
    }
    backend = ScriptedBackend({"scenario": "s", "entries": [{"text": "x", "expect": expect}]})
    assert backend.complete(REQUEST, timeout=1).text == "x"


def test_scripted_backend_cursor_survives_restart(tmp_path):
    cursor = tmp_path / "cursor"
    fixture = {"scenario": "resume", "entries": [{"text": "a"}, {"text": "b"}, {"text": "c"}]}
    first = ScriptedBackend(fixture, cursor_path=cursor)
    assert first.complete(REQUEST, timeout=1).text == "a"
    assert first.complete(REQUEST, timeout=1).text == "b"
    # a fresh instance (new process, same fixture) picks up after "b"
    second = ScriptedBackend(fixture, cursor_path=cursor)
    assert second.cursor == 2
    assert second.complete(REQUEST, timeout=1).text == "c"


def test_scripted_backend_from_file(tmp_path):
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps({"scenario": "file", "entries": [{"text": "hello"}]}))
    backend = ScriptedBackend.from_file(path)
    assert backend.complete(REQUEST, timeout=1).text == "hello"


def test_scripted_backend_usage_and_finish_reason():
    backend = ScriptedBackend(
        {"scenario": "s", "entries": [
            {"text": "t", "finish_reason": "length",
             "usage": {"prompt_tokens": 11, "completion_tokens": 4}},
        ]}
    )
    completion = backend.complete(REQUEST, timeout=1)
    assert completion.finish_reason == "length"
    assert completion.usage == Usage(11, 4)


# --- HTTP backend -------------------------------------------------------------------

IMAGE_REQUEST = make_request(
    "tutor",
    "describe",
    [Message(role="user", text="what is this", images=(b"\x89PNGdata",))],
)


def _http_gateway(handler, **config):
    backend = HttpBackend(
        "http://model.test/v1/chat",
        auth_token="sekrit",
        models={"tutor": "gpt-4-vision-preview"},
        transport=httpx.MockTransport(handler),
    )
    return Gateway(backend, GatewayConfig(**config), sleep=lambda s: None)


def test_http_backend_request_and_response_mapping():
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers.get("authorization")
        seen["payload"] = json.loads(request.content)
        return httpx.Response(200, json={
            "choices": [{"message": {"content": "an apple"}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 9, "completion_tokens": 2},
        })

    gateway = _http_gateway(handler)
    completion = gateway.complete(IMAGE_REQUEST)
    assert completion.text == "an apple"
    assert completion.usage == Usage(9, 2)
    assert seen["url"] == "http://model.test/v1/chat"
    assert seen["auth"] == "Bearer sekrit"
    payload = seen["payload"]
    assert payload["model"] == "gpt-4-vision-preview"
    assert payload["max_tokens"] == 1024
    assert payload["temperature"] == 0.95
    assert payload["top_p"] == 0.7
    assert payload["n"] == 1
    assert payload["messages"][0] == {"role": "system", "content": "describe"}
    parts = payload["messages"][1]["content"]
    assert parts[0] == {"type": "text", "text": "what is this"}
    assert parts[1]["type"] == "image_b64"
    import base64
    assert base64.b64decode(parts[1]["data"]) == b"\x89PNGdata"


def test_http_backend_client_error_rejected():
    gateway = _http_gateway(lambda request: httpx.Response(401, text="who are you"))
    with pytest.raises(BackendRejected, match="401"):
        gateway.complete(IMAGE_REQUEST)


def test_http_backend_server_errors_retry_then_succeed():
    responses = [500, 503, 200]

    def handler(request):
        status = responses.pop(0)
        if status != 200:
            return httpx.Response(status, text="busy")
        return httpx.Response(200, json={
            "choices": [{"message": {"content": "ok now"}, "finish_reason": "stop"}],
        })

    gateway = _http_gateway(handler)
    assert gateway.complete(IMAGE_REQUEST).text == "ok now"
    assert [r["status"] for r in gateway.log_records] == [
        "TransientBackendError", "TransientBackendError", "ok",
    ]


def test_http_backend_timeout_maps_to_timeout_error():
    def handler(request):
        raise httpx.ConnectTimeout("too slow")

    gateway = _http_gateway(handler, attempts=1)
    with pytest.raises(RetriesExhausted) as excinfo:
        gateway.complete(IMAGE_REQUEST)
    assert isinstance(excinfo.value.__cause__, Timeout)


def test_http_backend_transport_error_is_transient():
    def handler(request):
        raise httpx.ConnectError("refused")

    gateway = _http_gateway(handler, attempts=2)
    with pytest.raises(RetriesExhausted):
        gateway.complete(IMAGE_REQUEST)
    assert [r["status"] for r in gateway.log_records] == ["TransientBackendError"] * 2


# --- configuration loading -----------------------------------------------------------

def test_load_config_precedence(tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({
        "data_dir": "/from/file",
        "engine": {"k": 5, "h_window": 6},
        "gateway": {"attempts": 9},
    }))
    env = {"SLIDETUTOR_K": "7", "SLIDETUTOR_DATA_DIR": "/from/env"}
    config = load_config(config_file, env=env)
    assert config.data_dir == "/from/env"
    assert config.engine.k == 7
    assert config.engine.h_window == 6
    assert config.gateway.attempts == 9
    # untouched values keep their defaults
    assert config.engine.r_retries == 2
    assert config.renderer.timeout_s == 120.0


def test_load_config_defaults_without_sources():
    config = load_config(env={})
    assert config.engine.k == 3
    assert config.engine.h_window == 12
    assert config.engine.questions_kept == 1
    assert config.gateway.attempts == 3


def test_engine_config_bounds():
    from slidetutor.config import EngineConfig

    with pytest.raises(ValueError):
        EngineConfig(questions_kept=0)
    with pytest.raises(ValueError):
        EngineConfig(questions_kept=4)
    with pytest.raises(ValueError):
        EngineConfig(h_window=0)
