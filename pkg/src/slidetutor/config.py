"""Runtime configuration: dataclasses, config-file loading, env overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any


@dataclass(frozen=True)
class RendererConfig:
    """External rasterizer invocation.

    ``command`` is a template with ``{input}`` and ``{outdir}`` placeholders;
    the process must write one ``page-<index>.png`` per slide into outdir.
    """

    command: str = "python -m slidetutor.stub_renderer {input} {outdir}"
    timeout_s: float = 120.0


@dataclass(frozen=True)
class GatewayConfig:
    attempts: int = 3
    timeout_s: float = 120.0
    backoff_base_s: float = 0.5
    max_inflight: int = 8
    endpoint: str = "http://localhost:8080/v1/chat"
    auth_token: str = ""
    # profile name -> backend model identifier
    models: dict[str, str] = field(default_factory=dict)
    log_path: str | None = None


@dataclass(frozen=True)
class EngineConfig:
    k: int = 3                  # prior-script window for segmentation and quiz context
    r_retries: int = 2          # segmentation re-asks before fallback attachment
    h_window: int = 12          # utterances of history shown to in-class agents
    questions_kept: int = 1     # QA items kept per AskQuestion action (1..3)
    description_cap: int = 512  # max characters per page description

    def __post_init__(self) -> None:
        if not (1 <= self.questions_kept <= 3):
            raise ValueError("questions_kept must be between 1 and 3")
        if self.k < 0 or self.r_retries < 0 or self.h_window < 1:
            raise ValueError("invalid engine configuration")


@dataclass(frozen=True)
class AppConfig:
    data_dir: str = "./data"
    renderer: RendererConfig = field(default_factory=RendererConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)


_ENV_PREFIX = "SLIDETUTOR_"

# env var suffix -> (section, field, parser)
_ENV_MAP: dict[str, tuple[str, str, Any]] = {
    "DATA_DIR": ("", "data_dir", str),
    "RENDERER_COMMAND": ("renderer", "command", str),
    "RENDERER_TIMEOUT_S": ("renderer", "timeout_s", float),
    "GATEWAY_ENDPOINT": ("gateway", "endpoint", str),
    "GATEWAY_TOKEN": ("gateway", "auth_token", str),
    "GATEWAY_ATTEMPTS": ("gateway", "attempts", int),
    "GATEWAY_TIMEOUT_S": ("gateway", "timeout_s", float),
    "GATEWAY_LOG_PATH": ("gateway", "log_path", str),
    "K": ("engine", "k", int),
    "R": ("engine", "r_retries", int),
    "H": ("engine", "h_window", int),
    "QUESTIONS_KEPT": ("engine", "questions_kept", int),
    "DESCRIPTION_CAP": ("engine", "description_cap", int),
}


def _merge_section(cfg: Any, values: dict[str, Any]) -> Any:
    known = {k: v for k, v in values.items() if hasattr(cfg, k)}
    return replace(cfg, **known) if known else cfg


def load_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> AppConfig:
    """Build an AppConfig from an optional JSON file plus environment overrides.

    Precedence: defaults < file < SLIDETUTOR_* environment variables.
    """
    cfg = AppConfig()
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = replace(
            cfg,
            data_dir=raw.get("data_dir", cfg.data_dir),
            renderer=_merge_section(cfg.renderer, raw.get("renderer", {})),
            gateway=_merge_section(cfg.gateway, raw.get("gateway", {})),
            engine=_merge_section(cfg.engine, raw.get("engine", {})),
        )
    env = os.environ if env is None else env
    for suffix, (section, name, parse) in _ENV_MAP.items():
        raw_val = env.get(_ENV_PREFIX + suffix)
        if raw_val is None:
            continue
        value = parse(raw_val)
        if section == "":
            cfg = replace(cfg, **{name: value})
        else:
            cfg = replace(cfg, **{section: replace(getattr(cfg, section), **{name: value})})
    return cfg
