#!/usr/bin/env python3
"""Record console contract fixtures from the real governance server.

Runs the actual service in-process, drives it through the HTTP surface,
and freezes the wire responses under frontend/tests/fixtures/. The mock
server used by the console tests replays these verbatim, so the console
is tested against the genuine contract.

Usage: python3 scripts/record_console_fixtures.py
"""

from __future__ import annotations

import copy
import json
import shutil
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "frontend" / "tests" / "fixtures"

sys.path.insert(0, str(REPO / "src"))

from agentgov.audit import canonical_json, load_records, verify_records  # noqa: E402
from agentgov.config import ServiceConfig  # noqa: E402
from agentgov.harness import load_scenarios, run_scenarios  # noqa: E402
from agentgov.server import build_app  # noqa: E402
from agentgov.service import GovernanceService  # noqa: E402

OPERATOR = {"Authorization": "Bearer fixture-operator"}
AGENT = {"Authorization": "Bearer fixture-agent"}


def write(name: str, payload) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / name).write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"recorded {name}")


def main() -> int:
    workdir = Path(tempfile.mkdtemp(prefix="gov-fixtures-"))
    try:
        config = ServiceConfig(
            rules_path=str(REPO / "rules" / "flowr.json"),
            context_path=str(REPO / "context" / "flowr.json"),
            prompts_dir=str(REPO / "prompts"),
            log_path=str(workdir / "traces.log"),
        )
        service = GovernanceService.from_config(config)
        app = build_app(service, operator_token="fixture-operator", agent_token="fixture-agent")

        with TestClient(app) as client:
            # one suite pass populates traces and two pending escalations
            run_scenarios(load_scenarios(REPO / "scenarios"), service, repetitions=1)

            write("health.json", client.get("/health").json())
            write("rules_v1.json", client.get("/rules", headers=OPERATOR).json())
            write("context.json", client.get("/context", headers=OPERATOR).json())

            # validation: clean doc, then R7 stripped of its predicate
            doc = client.get("/rules", headers=OPERATOR).json()
            write("validate_ok.json", client.post("/rules/validate", json=doc, headers=OPERATOR).json())
            broken = copy.deepcopy(doc)
            for rule in broken["rules"]:
                if rule["id"] == "R7":
                    rule.pop("predicate")
            write("validate_schema_error.json", client.post("/rules/validate", json=broken, headers=OPERATOR).json())

            # rule activation: threshold edit -> v2; resubmit -> no-op warning
            edited = copy.deepcopy(doc)
            for rule in edited["rules"]:
                if rule["id"] == "R3":
                    rule["constraint"]["condition"][0]["value"] = 20000
            edited.pop("version")
            write("put_ok.json", client.put("/rules", json=edited, headers=OPERATOR).json())
            write("rules_v2.json", client.get("/rules", headers=OPERATOR).json())
            noop = client.get("/rules", headers=OPERATOR).json()
            noop.pop("version")
            write("put_noop.json", client.put("/rules", json=noop, headers=OPERATOR).json())

            # escalations: the S2 and S4 cards from the suite pass
            pending = client.get("/escalations", params={"status": "PENDING"}, headers=OPERATOR).json()
            write("escalations_pending.json", pending)
            s2_card = next(
                item for item in pending["escalations"] if item["intent"]["agent_id"] == "procurement"
            )
            s4_card = next(
                item
                for item in pending["escalations"]
                if item["intent"]["agent_id"] == "inventory_replenishment"
            )
            write("escalation_s2.json", s2_card)
            write("escalation_s4.json", s4_card)

            approved = client.post(
                f"/escalations/{s2_card['escalation_id']}/resolve",
                json={"verdict": "APPROVED", "operator_id": "console-operator", "note": "order approved after review"},
                headers=OPERATOR,
            ).json()
            write("escalation_s2_approved.json", approved)
            conflict = client.post(
                f"/escalations/{s2_card['escalation_id']}/resolve",
                json={"verdict": "DENIED", "operator_id": "console-operator", "note": "second click"},
                headers=OPERATOR,
            )
            assert conflict.status_code == 409
            write("resolve_conflict.json", conflict.json())
            denied = client.post(
                f"/escalations/{s4_card['escalation_id']}/resolve",
                json={"verdict": "DENIED", "operator_id": "console-operator", "note": "hold during disruption"},
                headers=OPERATOR,
            ).json()
            write("escalation_s4_denied.json", denied)

            # traces and chain verification (intact, then scripted corruption)
            write("traces_page.json", client.get("/traces", headers=OPERATOR).json())
            write(
                "traces_self_correct.json",
                client.get("/traces", params={"decision": "SELF-CORRECT"}, headers=OPERATOR).json(),
            )
            write("verify_ok.json", client.get("/traces/verify", headers=OPERATOR).json())

            records = load_records(config.log_path)
            records[3]["reasoning"] = records[3]["reasoning"] + " [tampered]"
            report = verify_records(records)
            assert not report.ok
            write("verify_broken.json", report.to_dict())
            write(
                "events_sample.json",
                {
                    "pending_event": {"event": "escalation.pending", "payload": s2_card},
                    "resolved_event": {"event": "escalation.resolved", "payload": approved},
                },
            )
        return 0
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


if __name__ == "__main__":
    raise SystemExit(main())
