"""CLI subcommands drive the same machinery headless."""

from __future__ import annotations

import json

from agentgov.cli import main

from .conftest import CONTEXT_PATH, PROMPTS_DIR, RULES_PATH, SCENARIOS_DIR


class TestValidate:
    def test_valid_document(self, capsys):
        assert main(["validate", str(RULES_PATH)]) == 0
        out = capsys.readouterr().out
        assert "version 1" in out and "7 rule(s)" in out

    def test_invalid_document(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        body = json.loads(RULES_PATH.read_text())
        body["rules"][6].pop("predicate")  # R7
        bad.write_text(json.dumps(body))
        assert main(["validate", str(bad)]) == 1
        err = capsys.readouterr().err
        assert "SCHEMA_ERROR" in err and "R7" in err

    def test_malformed_document(self, tmp_path, capsys):
        bad = tmp_path / "broken.json"
        bad.write_text("{nope")
        assert main(["validate", str(bad)]) == 1
        assert "PARSE_ERROR" in capsys.readouterr().err


class TestLint:
    def test_clean_ruleset(self, capsys):
        assert main(["lint", str(RULES_PATH)]) == 0
        assert "clean" in capsys.readouterr().out

    def test_warnings_printed(self, tmp_path, capsys):
        body = json.loads(RULES_PATH.read_text())
        body["rules"][0]["rationale"] = ""
        path = tmp_path / "warned.json"
        path.write_text(json.dumps(body))
        assert main(["lint", str(path)]) == 0
        assert "MISSING_RATIONALE" in capsys.readouterr().out


class TestScenarios:
    def test_suite_runs_headless(self, tmp_path, capsys):
        json_out = tmp_path / "report.json"
        code = main(
            [
                "scenarios",
                "run",
                "--rules", str(RULES_PATH),
                "--context", str(CONTEXT_PATH),
                "--scenarios", str(SCENARIOS_DIR),
                "--prompts", str(PROMPTS_DIR),
                "--log", str(tmp_path / "traces.log"),
                "--repetitions", "2",
                "--json-out", str(json_out),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "Overall" in out and "8/8" in out
        report = json.loads(json_out.read_text())
        assert report["accuracy"] == "8/8"
        assert report["escalation_precision"] == "4/4"


class TestTraces:
    def run_suite(self, tmp_path):
        log = tmp_path / "traces.log"
        main(
            [
                "scenarios", "run",
                "--rules", str(RULES_PATH),
                "--context", str(CONTEXT_PATH),
                "--scenarios", str(SCENARIOS_DIR),
                "--prompts", str(PROMPTS_DIR),
                "--log", str(log),
                "--repetitions", "1",
            ]
        )
        return log

    def test_query_and_verify(self, tmp_path, capsys):
        log = self.run_suite(tmp_path)
        capsys.readouterr()
        assert main(["traces", "query", "--log", str(log), "--decision", "ESCALATE"]) == 0
        out = capsys.readouterr().out
        assert out.count('"decision": "ESCALATE"') == 2

        assert main(["traces", "verify", "--log", str(log)]) == 0
        assert '"ok": true' in capsys.readouterr().out

    def test_verify_detects_tamper(self, tmp_path, capsys):
        log = self.run_suite(tmp_path)
        lines = log.read_text().splitlines()
        record = json.loads(lines[2])
        record["reasoning"] = "rewritten"
        lines[2] = json.dumps(record, sort_keys=True, separators=(",", ":"))
        log.write_text("\n".join(lines) + "\n")
        capsys.readouterr()
        assert main(["traces", "verify", "--log", str(log)]) == 1
        out = capsys.readouterr().out
        assert '"ok": false' in out and '"first_mismatch_index": 2' in out

    def test_missing_log_errors(self, tmp_path, capsys):
        assert main(["traces", "verify", "--log", str(tmp_path / "nope.log")]) == 1
