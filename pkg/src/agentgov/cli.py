"""Command-line interface.

Subcommands: serve, validate, lint, scenarios run, traces query,
traces verify, escalations list, escalations resolve. Rule/trace commands
operate on local files; escalation commands talk to a running server.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .audit import load_records, verify_records
from .config import ServiceConfig, load_config
from .errors import GovernanceError
from .harness import load_scenarios, run_scenarios
from .rules import lint_ruleset, load_ruleset
from .service import GovernanceService


def _print(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False))


def cmd_serve(args) -> int:
    from .server import serve

    config = load_config(args.config) if args.config else ServiceConfig()
    serve(config)
    return 0


def cmd_validate(args) -> int:
    try:
        doc = load_ruleset(Path(args.rules).read_bytes())
    except GovernanceError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        for violation in getattr(exc, "violations", []):
            print(f"  - {violation.code} [{violation.rule_id}]: {violation.message}", file=sys.stderr)
        return 1
    print(f"OK: version {doc.version}, {len(doc.rules)} rule(s)")
    return 0


def cmd_lint(args) -> int:
    doc = load_ruleset(Path(args.rules).read_bytes())
    warnings = lint_ruleset(doc)
    for w in warnings:
        print(f"{w.code} [{w.rule_id}]: {w.message}")
    if not warnings:
        print("clean: no lint warnings")
    return 0


def cmd_scenarios_run(args) -> int:
    config = ServiceConfig(
        rules_path=args.rules,
        context_path=args.context,
        prompts_dir=args.prompts,
        log_path=args.log,
        deliberator="reference",
        fsync_traces=not args.no_fsync,
    )
    service = GovernanceService.from_config(config)
    specs = load_scenarios(args.scenarios)
    report = run_scenarios(specs, service, repetitions=args.repetitions)
    print(report.to_table())
    if args.json_out:
        Path(args.json_out).write_text(report.to_json() + "\n", encoding="utf-8")
        print(f"report written to {args.json_out}")
    return 0 if report.total_correct == report.total_runs else 1


def cmd_traces_query(args) -> int:
    from .audit import TraceLog

    log = TraceLog(args.log) if Path(args.log).exists() else None
    if log is None:
        print(f"no such log: {args.log}", file=sys.stderr)
        return 1
    records = log.query_traces(
        agent_id=args.agent_id,
        workflow_id=args.workflow_id,
        decision=args.decision,
        rule_id=args.rule_id,
        limit=args.limit,
    )
    for r in records:
        _print(
            {
                "trace_id": r.trace_id,
                "timestamp_ns": r.timestamp_ns,
                "agent_id": r.agent_id,
                "decision": r.decision,
                "round_index": r.round_index,
                "rules_retrieved": list(r.rules_retrieved),
                "rules_cited": list(r.rules_cited),
            }
        )
    log.close()
    return 0


def cmd_traces_verify(args) -> int:
    if not Path(args.log).exists():
        print(f"no such log: {args.log}", file=sys.stderr)
        return 1
    report = verify_records(load_records(args.log))
    _print(report.to_dict())
    return 0 if report.ok else 1


def _client(args):
    import httpx

    headers = {}
    token = os.environ.get("GOV_OPERATOR_TOKEN", "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return httpx.Client(base_url=args.server, headers=headers, timeout=10.0)


def cmd_escalations_list(args) -> int:
    with _client(args) as client:
        response = client.get("/escalations", params={"status": args.status} if args.status else {})
        response.raise_for_status()
        _print(response.json())
    return 0


def cmd_escalations_resolve(args) -> int:
    with _client(args) as client:
        response = client.post(
            f"/escalations/{args.escalation_id}/resolve",
            json={"verdict": args.verdict, "operator_id": args.operator, "note": args.note},
        )
        if response.status_code >= 400:
            _print(response.json())
            return 1
        _print(response.json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentgov", description="Pre-action governance middleware")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the governance server")
    p.add_argument("--config", help="path to a service config JSON file")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate", help="validate a rule-set document")
    p.add_argument("rules", help="path to the rule-set JSON file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("lint", help="lint a rule-set document")
    p.add_argument("rules")
    p.set_defaults(func=cmd_lint)

    scenarios = sub.add_parser("scenarios", help="scenario harness").add_subparsers(
        dest="subcommand", required=True
    )
    p = scenarios.add_parser("run", help="run the scenario suite headless")
    p.add_argument("--rules", default="rules/flowr.json")
    p.add_argument("--context", default="context/flowr.json")
    p.add_argument("--scenarios", default="scenarios")
    p.add_argument("--prompts", default="prompts")
    p.add_argument("--log", default="harness-traces.log")
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--json-out", dest="json_out", default=None)
    p.add_argument("--no-fsync", action="store_true", help="skip fsync per append (benchmarks)")
    p.set_defaults(func=cmd_scenarios_run)

    traces = sub.add_parser("traces", help="trace log tools").add_subparsers(
        dest="subcommand", required=True
    )
    p = traces.add_parser("query", help="query a local trace log")
    p.add_argument("--log", default="traces.log")
    p.add_argument("--agent-id", dest="agent_id")
    p.add_argument("--workflow-id", dest="workflow_id")
    p.add_argument("--decision")
    p.add_argument("--rule-id", dest="rule_id")
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_traces_query)
    p = traces.add_parser("verify", help="verify a local trace log hash chain")
    p.add_argument("--log", default="traces.log")
    p.set_defaults(func=cmd_traces_verify)

    escalations = sub.add_parser("escalations", help="escalation queue (remote)").add_subparsers(
        dest="subcommand", required=True
    )
    p = escalations.add_parser("list")
    p.add_argument("--server", default="http://127.0.0.1:8470")
    p.add_argument("--status", default=None)
    p.set_defaults(func=cmd_escalations_list)
    p = escalations.add_parser("resolve")
    p.add_argument("escalation_id")
    p.add_argument("--verdict", required=True, choices=["APPROVED", "DENIED"])
    p.add_argument("--operator", default="operator")
    p.add_argument("--note", required=True)
    p.add_argument("--server", default="http://127.0.0.1:8470")
    p.set_defaults(func=cmd_escalations_resolve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GovernanceError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
