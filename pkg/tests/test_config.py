"""Service configuration: strict keys, backend coherence, path resolution."""

from __future__ import annotations

import json

import pytest

from agentgov.config import ServiceConfig, config_from_dict, load_config
from agentgov.errors import ConfigError


class TestConfig:
    def test_defaults_are_valid(self):
        config = ServiceConfig()
        assert config.deliberator == "reference"
        assert config.max_self_correct == 3

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict({"rules_path": "rules/flowr.json", "max_self_corrct": 2})
        assert "max_self_corrct" in str(err.value)

    def test_unknown_endpoint_keys_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict(
                {"deliberator": "llm", "endpoint": {"base_url": "http://x", "model": "m", "modle": "m"}}
            )

    def test_llm_backend_requires_endpoint(self):
        with pytest.raises(ConfigError):
            config_from_dict({"deliberator": "llm"})

    def test_bad_default_action_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"default_action": "MAYBE"})

    def test_relative_paths_resolve_against_config_dir(self, tmp_path):
        (tmp_path / "service.json").write_text(
            json.dumps({"rules_path": "my-rules.json", "log_path": "/var/log/gov.log"})
        )
        config = load_config(tmp_path / "service.json")
        assert config.rules_path == str(tmp_path / "my-rules.json")
        assert config.log_path == "/var/log/gov.log"

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_endpoint_round_trip(self):
        config = config_from_dict(
            {
                "deliberator": "llm",
                "endpoint": {"base_url": "http://llm.internal/v1", "model": "gov-1", "temperature": 0.0},
            }
        )
        assert config.endpoint is not None
        assert config.endpoint.model == "gov-1"
        assert config.endpoint.auth_token_env == "GOV_LLM_API_KEY"
