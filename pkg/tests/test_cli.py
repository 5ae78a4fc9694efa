import json

import pytest

from slidetutor.cli import main
from slidetutor.jsonio import atomic_write_json
from slidetutor.store import LectureStore

from pptxgen import build_pptx
from test_service import TINY_PLAN_ENTRIES


@pytest.fixture()
def cli_env(tmp_path, stub_command):
    """Config file, deck archive, and fixture files for an offline CLI run."""
    config_path = tmp_path / "config.json"
    atomic_write_json(config_path, {
        "data_dir": str(tmp_path / "data"),
        "renderer": {"command": stub_command},
    })
    deck_path = tmp_path / "tiny.pptx"
    deck_path.write_bytes(build_pptx(
        [["Alpha", "First page body"], ["Beta", "Second page body"], ["Gamma", "Third page body"]]
    ))
    fixtures_path = tmp_path / "plan_fixture.json"
    atomic_write_json(fixtures_path, {
        "scenario": "cli",
        "entries": [{"text": e} for e in TINY_PLAN_ENTRIES],
    })
    script_path = tmp_path / "user.json"
    atomic_write_json(script_path, {"events": [{"type": "continue"}] * 4})
    return {
        "config": config_path,
        "deck": deck_path,
        "fixtures": fixtures_path,
        "script": script_path,
        "data_dir": tmp_path / "data",
    }


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def test_ingest_plan_simulate_round_trip(cli_env, capsys):
    rc = run_cli("--config", cli_env["config"], "ingest", cli_env["deck"],
                 "--title", "Tiny Deck", "--lecture-id", "lec-cli")
    assert rc == 0
    assert capsys.readouterr().out.strip() == "lec-cli"

    rc = run_cli("--config", cli_env["config"], "plan", "lec-cli",
                 "--fixtures", cli_env["fixtures"])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "lec-cli planned"

    rc = run_cli("--config", cli_env["config"], "simulate", "lec-cli",
                 "--script", cli_env["script"], "--deterministic-clock")
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "[0] system (show_page): page 0"
    assert lines[-1].startswith("# phase=complete cursor=7")

    store = LectureStore(cli_env["data_dir"])
    assert store.record("lec-cli")["status"] == "planned"
    assert len(store.load_queue("lec-cli").actions) == 7


def test_ingest_prints_generated_id(cli_env, capsys):
    assert run_cli("--config", cli_env["config"], "ingest", cli_env["deck"]) == 0
    lecture_id = capsys.readouterr().out.strip()
    record = LectureStore(cli_env["data_dir"]).record(lecture_id)
    # the title falls back to the archive file name
    assert record["title"] == "tiny"


def test_data_dir_flag_overrides_config(cli_env, tmp_path, capsys):
    override = tmp_path / "elsewhere"
    assert run_cli("--config", cli_env["config"], "--data-dir", override,
                   "ingest", cli_env["deck"], "--lecture-id", "lec-x") == 0
    capsys.readouterr()
    assert LectureStore(override).list_lectures() == ["lec-x"]
    assert LectureStore(cli_env["data_dir"]).list_lectures() == []


def test_domain_errors_exit_nonzero(cli_env, capsys):
    rc = run_cli("--config", cli_env["config"], "plan", "ghost",
                 "--fixtures", cli_env["fixtures"])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error: UnknownLecture")


def test_simulate_resumes_existing_session(cli_env, capsys):
    assert run_cli("--config", cli_env["config"], "ingest", cli_env["deck"],
                   "--title", "Tiny Deck", "--lecture-id", "lec-cli") == 0
    assert run_cli("--config", cli_env["config"], "plan", "lec-cli",
                   "--fixtures", cli_env["fixtures"]) == 0
    capsys.readouterr()

    partial = cli_env["config"].parent / "partial.json"
    atomic_write_json(partial, {"events": [{"type": "continue"}] * 2})
    rc = run_cli("--config", cli_env["config"], "simulate", "lec-cli",
                 "--script", partial, "--session-id", "sess-cli",
                 "--deterministic-clock")
    assert rc == 0
    first = capsys.readouterr().out.strip().splitlines()
    assert first[-1].startswith("# phase=awaiting_user")

    rc = run_cli("--config", cli_env["config"], "simulate", "lec-cli",
                 "--script", cli_env["script"], "--session-id", "sess-cli",
                 "--deterministic-clock")
    assert rc == 0
    resumed = capsys.readouterr().out.strip().splitlines()
    assert resumed[-1].startswith("# phase=complete cursor=7")
    # the transcript grows monotonically across the two invocations
    assert resumed[:len(first) - 1] == first[:-1]


def test_serve_builds_app_with_scripted_gateway(cli_env, monkeypatch):
    captured = {}

    def fake_run(app, host, port, log_level):
        captured.update(app=app, host=host, port=port)

    import uvicorn

    monkeypatch.setattr(uvicorn, "run", fake_run)
    rc = run_cli("--config", cli_env["config"], "serve",
                 "--fixtures", cli_env["fixtures"], "--port", "9123")
    assert rc == 0
    assert captured["port"] == 9123
    assert captured["host"] == "127.0.0.1"
    assert captured["app"].state.gateway.backend.remaining() == len(TINY_PLAN_ENTRIES)
