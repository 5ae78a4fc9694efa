import json
import sys
from pathlib import Path

import pytest

from slidetutor.config import EngineConfig, RendererConfig
from slidetutor.deck import parse_deck, rasterize_deck
from slidetutor.gateway import Gateway, ScriptedBackend

from pptxgen import build_pptx

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    return json.loads((FIXTURES / name).read_text())


def scripted_gateway(entries, scenario="test", **kwargs) -> Gateway:
    """Gateway over a ScriptedBackend; entries may be reply strings or dicts."""
    normalized = [e if isinstance(e, dict) else {"text": e} for e in entries]
    backend = ScriptedBackend({"scenario": scenario, "entries": normalized})
    return Gateway(backend, **kwargs)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def stub_command() -> str:
    return f"{sys.executable} -m slidetutor.stub_renderer {{input}} {{outdir}}"


@pytest.fixture(scope="session")
def renderer_config(stub_command) -> RendererConfig:
    return RendererConfig(command=stub_command)


@pytest.fixture(scope="session")
def engine_config() -> EngineConfig:
    return EngineConfig()


@pytest.fixture(scope="session")
def tiny_archive() -> bytes:
    return build_pptx(
        [
            ["Alpha", "First page body"],
            ["Beta", "Second page body"],
            ["Gamma", "Third page body"],
        ]
    )


@pytest.fixture(scope="session")
def tiny_deck(tiny_archive, renderer_config):
    return rasterize_deck(parse_deck(tiny_archive, "Tiny Deck"), renderer_config)


@pytest.fixture(scope="session")
def golden_deck(renderer_config):
    archive = (FIXTURES / "golden_deck.pptx").read_bytes()
    return rasterize_deck(parse_deck(archive, "Intro to Machine Learning"), renderer_config)


@pytest.fixture(scope="session")
def plan_fixture() -> dict:
    return load_fixture("plan_fixture.json")


@pytest.fixture(scope="session")
def teach_fixture() -> dict:
    return load_fixture("teach_fixture.json")


@pytest.fixture(scope="session")
def user_events() -> list:
    return load_fixture("user_script.json")["events"]


@pytest.fixture(scope="session")
def golden_agenda_doc() -> dict:
    return load_fixture("golden_agenda.json")


@pytest.fixture(scope="session")
def golden_queue_doc() -> dict:
    return load_fixture("golden_queue.json")


@pytest.fixture(scope="session")
def golden_transcript_doc() -> dict:
    return load_fixture("golden_transcript.json")
