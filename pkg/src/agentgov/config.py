"""Service configuration.

Everything must resolve at startup; unknown keys are rejected so typos
fail loudly. Secrets (operator/agent credentials, the LLM key) come only
from the environment — configuration files name the variables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .deliberation import DEFAULT_READ_VERBS, CompletionEndpointConfig
from .errors import ConfigError


@dataclass
class ServiceConfig:
    rules_path: str = "rules/flowr.json"
    context_path: str = "context/flowr.json"
    prompts_dir: str = "prompts"
    log_path: str = "traces.log"
    listen_host: str = "127.0.0.1"
    listen_port: int = 8470
    deliberator: str = "reference"
    endpoint: CompletionEndpointConfig | None = None
    max_self_correct: int = 3
    default_action: str = "PROCEED"
    irreversible_action_classes: tuple[str, ...] = ()
    read_verbs: tuple[str, ...] = tuple(sorted(DEFAULT_READ_VERBS))
    token_ttl_s: float = 3600.0
    escalation_ttl_s: float = 86400.0
    fsync_traces: bool = True
    operator_token_env: str = "GOV_OPERATOR_TOKEN"
    agent_token_env: str = "GOV_AGENT_TOKEN"

    def __post_init__(self) -> None:
        if self.deliberator not in ("reference", "llm"):
            raise ConfigError(f"deliberator must be 'reference' or 'llm', got {self.deliberator!r}")
        if self.deliberator == "llm" and self.endpoint is None:
            raise ConfigError("llm backend selected but no endpoint configured")
        if self.default_action not in ("PROCEED", "ESCALATE"):
            raise ConfigError(f"default_action must be PROCEED or ESCALATE, got {self.default_action!r}")
        if self.max_self_correct < 0:
            raise ConfigError("max_self_correct must be >= 0")


_ENDPOINT_FIELDS = {f.name for f in fields(CompletionEndpointConfig)}
_CONFIG_FIELDS = {f.name for f in fields(ServiceConfig)}


def config_from_dict(data: dict, base_dir: Path | None = None) -> ServiceConfig:
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    body = dict(data)
    if body.get("endpoint") is not None:
        raw = body["endpoint"]
        bad = set(raw) - _ENDPOINT_FIELDS
        if bad:
            raise ConfigError(f"unknown endpoint keys: {sorted(bad)}")
        if "base_url" not in raw or "model" not in raw:
            raise ConfigError("endpoint needs base_url and model")
        body["endpoint"] = CompletionEndpointConfig(**raw)
    for key in ("irreversible_action_classes", "read_verbs"):
        if key in body:
            body[key] = tuple(body[key])
    cfg = ServiceConfig(**body)
    if base_dir is not None:
        for key in ("rules_path", "context_path", "prompts_dir", "log_path"):
            value = Path(getattr(cfg, key))
            if not value.is_absolute():
                setattr(cfg, key, str(base_dir / value))
    return cfg


def load_config(path: str | Path) -> ServiceConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return config_from_dict(data, base_dir=path.resolve().parent)
