"""The assembled governance service.

One object wiring the rule store, live context, trace log, escalation
queue, deliberation backends, and the engine. Both API surfaces (HTTP and
the JSON-RPC tool protocol), the CLI, and the scenario harness drive this
facade, which is what makes their semantics identical by construction.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from pathlib import Path
from typing import Any

from .audit import TraceLog
from .config import ServiceConfig
from .context import LiveContext
from .deliberation import Deliberator, LLMDeliberator, ReferenceDeliberator
from .engine import EngineConfig, GovernanceEngine
from .errors import ConfigError, GovernanceError
from .escalations import EscalationQueue
from .intents import IntentDescriptor, Outcome
from .prompts import PromptConstructor
from .rules import (
    RuleStore,
    applicable_rules,
    document_from_dict,
    document_to_dict,
    lint_ruleset,
    load_ruleset,
    rule_to_dict,
    validate_ruleset,
)


class EventBroker:
    """Sequence-numbered fan-out for escalation/context/rule events.

    Supports both push (blocking iterator for the SSE stream) and pull
    (cursor-based long-poll).
    """

    def __init__(self, history: int = 1000) -> None:
        self._cond = threading.Condition()
        self._events: deque[dict] = deque(maxlen=history)
        self._seq = 0

    def publish(self, event: str, payload: dict) -> None:
        with self._cond:
            self._seq += 1
            self._events.append({"seq": self._seq, "event": event, "payload": payload})
            self._cond.notify_all()

    def cursor(self) -> int:
        with self._cond:
            return self._seq

    def poll(self, cursor: int = 0, wait_s: float = 0.0) -> tuple[list[dict], int]:
        """Events after ``cursor``; blocks up to ``wait_s`` when empty."""
        deadline = time.monotonic() + wait_s
        with self._cond:
            while True:
                fresh = [e for e in self._events if e["seq"] > cursor]
                if fresh or wait_s <= 0:
                    return fresh, self._seq
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return [], self._seq
                self._cond.wait(timeout=remaining)


class GovernanceService:
    """Facade over the whole engine; one instance per deployment."""

    def __init__(
        self,
        store: RuleStore,
        context: LiveContext,
        log: TraceLog,
        queue: EscalationQueue,
        deliberators: dict[str, Deliberator],
        default_backend: str,
        engine: GovernanceEngine,
        config: ServiceConfig | None = None,
    ) -> None:
        self.store = store
        self.context = context
        self.log = log
        self.queue = queue
        self.deliberators = deliberators
        self.default_backend = default_backend
        self.engine = engine
        self.config = config
        self.broker = EventBroker()
        self.queue.set_notifier(self.broker.publish)
        self.context.set_recorder(self._record_context_event)
        self.started_at = time.time()

    # -- assembly --

    @classmethod
    def from_config(cls, cfg: ServiceConfig) -> "GovernanceService":
        rules_path = Path(cfg.rules_path)
        if not rules_path.exists():
            raise ConfigError(f"rules file not found: {rules_path}")
        store = RuleStore(load_ruleset(rules_path.read_bytes()))

        context_seed: dict[str, Any] = {"signals": {}, "registries": {}}
        context_path = Path(cfg.context_path)
        if context_path.exists():
            context_seed = json.loads(context_path.read_text(encoding="utf-8"))
        context = LiveContext(
            signals=context_seed.get("signals", {}),
            registries=context_seed.get("registries", {}),
        )

        log = TraceLog(cfg.log_path, fsync=cfg.fsync_traces)
        queue = EscalationQueue(
            log=log, token_ttl_s=cfg.token_ttl_s, pending_ttl_s=cfg.escalation_ttl_s
        )

        prompts_dir = Path(cfg.prompts_dir)
        constructor = (
            PromptConstructor.from_dir(prompts_dir) if prompts_dir.is_dir() else PromptConstructor()
        )
        read_verbs = frozenset(cfg.read_verbs)
        deliberators: dict[str, Deliberator] = {
            "reference": ReferenceDeliberator(token_validator=queue.validate_token, read_verbs=read_verbs)
        }
        if cfg.endpoint is not None:
            deliberators["llm"] = LLMDeliberator(cfg.endpoint, constructor=constructor)

        engine = GovernanceEngine(
            log=log,
            queue=queue,
            config=EngineConfig(
                max_self_correct=cfg.max_self_correct,
                default_action=Outcome(cfg.default_action),
                irreversible_action_classes=frozenset(cfg.irreversible_action_classes),
            ),
        )
        return cls(
            store=store,
            context=context,
            log=log,
            queue=queue,
            deliberators=deliberators,
            default_backend=cfg.deliberator,
            engine=engine,
            config=cfg,
        )

    # -- agent surface --

    def evaluate_intent(self, intent_body: dict, backend: str | None = None) -> dict:
        """Run the loop for one submitted intent.

        The evaluation pins the active rule-set version and one context
        snapshot for its full duration; a hot rule swap never affects an
        in-flight run.
        """
        intent = IntentDescriptor.from_dict(intent_body)
        doc = self.store.active()
        ctx = self.context.snapshot()
        deliberator = self._backend(backend)
        decision, trace = self.engine.evaluate(intent, ctx, doc, deliberator)
        return {
            "decision": decision.to_dict(),
            "trace_id": trace.trace_id,
            "ruleset_version": doc.version,
            "snapshot_id": ctx.snapshot_id,
        }

    def get_applicable_rules(self, agent_id: str, workflow_id: str) -> dict:
        doc = self.store.active()
        ctx = self.context.snapshot()
        rules = applicable_rules(doc, agent_id, workflow_id, ctx)
        return {
            "ruleset_version": doc.version,
            "snapshot_id": ctx.snapshot_id,
            "rules": [rule_to_dict(r) for r in rules],
        }

    # -- operator surface: rules --

    def get_rules(self, version: int | None = None) -> dict:
        doc = self.store.active() if version is None else self.store.get(version)
        return document_to_dict(doc)

    def put_rules(self, body: dict, actor: str = "operator") -> dict:
        """Validate-then-activate a new version; a no-change submission is
        reported rather than versioned."""
        active = self.store.active()
        normalized = document_from_dict({**body, "version": active.version})
        if normalized.rules == active.rules and dict(normalized.metadata) == dict(active.metadata):
            return {
                "activated": False,
                "version": active.version,
                "warning": "document identical to the active version; nothing activated",
            }
        doc = self.store.propose(body)
        self.store.activate(doc)
        self.log.append_event(
            "ruleset_activated",
            actor,
            {"version": doc.version, "rule_count": len(doc.rules)},
        )
        self.broker.publish("rules.activated", {"version": doc.version})
        return {"activated": True, "version": doc.version}

    def validate_rules(self, body: dict) -> dict:
        try:
            doc = document_from_dict(body)
        except GovernanceError as exc:
            violations = getattr(exc, "violations", [])
            return {
                "valid": False,
                "error": exc.code,
                "violations": [
                    {"code": v.code, "rule_id": v.rule_id, "message": v.message} for v in violations
                ],
            }
        leftover = validate_ruleset(doc)
        return {
            "valid": not leftover,
            "violations": [{"code": v.code, "rule_id": v.rule_id, "message": v.message} for v in leftover],
        }

    def lint_rules(self, body: dict | None = None, version: int | None = None) -> dict:
        if body is not None:
            doc = document_from_dict(body)
        else:
            doc = self.store.active() if version is None else self.store.get(version)
        warnings = lint_ruleset(doc)
        return {
            "warnings": [{"code": w.code, "rule_id": w.rule_id, "message": w.message} for w in warnings]
        }

    # -- operator surface: context --

    def get_context(self) -> dict:
        return self.context.state()

    def set_signal(self, key: str, value, actor: str = "operator") -> dict:
        self.context.set_signal(key, value, actor=actor)
        self.broker.publish("context.changed", {"key": key, "value": value})
        return self.get_context()

    def update_registry(self, name: str, members: list[str], actor: str = "operator") -> dict:
        self.context.update_registry(name, members, actor=actor)
        self.broker.publish("context.changed", {"registry": name})
        return self.get_context()

    # -- operator surface: traces --

    def query_traces(
        self,
        agent_id: str | None = None,
        workflow_id: str | None = None,
        decision: str | None = None,
        rule_id: str | None = None,
        start_ns: int | None = None,
        end_ns: int | None = None,
        after_ts: int | None = None,
        after_id: str | None = None,
        limit: int | None = None,
    ) -> dict:
        after = (after_ts, after_id) if after_ts is not None and after_id is not None else None
        records = self.log.query_traces(
            agent_id=agent_id,
            workflow_id=workflow_id,
            decision=decision,
            rule_id=rule_id,
            start_ns=start_ns,
            end_ns=end_ns,
            after=after,
            limit=limit,
        )
        items = [
            {
                "trace_id": r.trace_id,
                "timestamp_ns": r.timestamp_ns,
                "agent_id": r.agent_id,
                "workflow_id": r.workflow_id,
                "intent": dict(r.intent),
                "rules_retrieved": list(r.rules_retrieved),
                "ruleset_version": r.ruleset_version,
                "rules_cited": list(r.rules_cited),
                "reasoning": r.reasoning,
                "decision": r.decision,
                "round_index": r.round_index,
                "deliberator_name": r.deliberator_name,
                "prompt_template_version": r.prompt_template_version,
                "prev_hash": r.prev_hash,
                "record_hash": r.record_hash,
            }
            for r in records
        ]
        cursor = None
        if items:
            cursor = {"after_ts": items[-1]["timestamp_ns"], "after_id": items[-1]["trace_id"]}
        return {"traces": items, "next_cursor": cursor}

    def verify_chain(self, start: int = 0, end: int | None = None) -> dict:
        return self.log.verify_chain(start=start, end=end).to_dict()

    def export_traces(self) -> list[str]:
        return self.log.export_lines()

    # -- operator surface: escalations --

    def list_escalations(self, status: str | None = None) -> dict:
        items = self.queue.list(status=status)
        return {"escalations": [i.to_dict() for i in items]}

    def resolve_escalation(self, escalation_id: str, verdict: str, operator_id: str, note: str = "") -> dict:
        item = self.queue.resolve(escalation_id, verdict, operator_id, note)
        return item.to_dict()

    # -- health --

    def health(self) -> dict:
        doc = self.store.active()
        chain = self.log.verify_chain()
        backend = self._backend(None)
        status = "OK"
        if isinstance(backend, LLMDeliberator):
            status = "OK" if backend.health_check() else "DEGRADED"
        return {
            "status": "ok" if chain.ok else "degraded",
            "ruleset_version": doc.version,
            "rule_count": len(doc.rules),
            "deliberator": {"name": self.default_backend, "status": status},
            "chain": "OK" if chain.ok else "BROKEN",
            "records": chain.records_checked,
            "pending_escalations": len(self.queue.list(status="PENDING")),
            "time": _iso_now(),
        }

    # -- internals --

    def _backend(self, name: str | None) -> Deliberator:
        chosen = name or self.default_backend
        try:
            return self.deliberators[chosen]
        except KeyError:
            raise ConfigError(f"no such deliberation backend: {chosen}") from None

    def _record_context_event(self, kind: str, actor: str, detail: dict) -> None:
        self.log.append_event(kind, actor, detail)


def _iso_now() -> str:
    from datetime import datetime, timezone

    return datetime.now(timezone.utc).isoformat()
