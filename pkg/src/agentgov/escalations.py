"""Suspended escalations awaiting human review.

An approved escalation mints one approval token per triggering rule;
re-submitting the intent with those tokens satisfies the corresponding
REQUIRE_APPROVAL/READ_ONLY gates. Resolution is exactly-once.
"""

from __future__ import annotations

import secrets
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass, replace
from enum import Enum

from .audit import TraceLog
from .errors import AlreadyResolvedError, EscalationNotFoundError
from .intents import ComplianceDecision, EscalationMessage, IntentDescriptor, Outcome


class EscalationStatus(Enum):
    PENDING = "PENDING"
    APPROVED = "APPROVED"
    DENIED = "DENIED"
    EXPIRED = "EXPIRED"


_TERMINAL = frozenset({EscalationStatus.APPROVED, EscalationStatus.DENIED, EscalationStatus.EXPIRED})


@dataclass(frozen=True)
class ApprovalToken:
    rule_id: str
    token: str
    expires_at_ns: int

    def to_dict(self) -> dict:
        return {"rule_id": self.rule_id, "token": self.token, "expires_at_ns": self.expires_at_ns}


@dataclass(frozen=True)
class PendingEscalation:
    escalation_id: str
    message: EscalationMessage
    intent: IntentDescriptor
    created_at_ns: int
    status: EscalationStatus = EscalationStatus.PENDING
    resolver: str = ""
    note: str = ""
    approval_tokens: tuple[ApprovalToken, ...] = ()

    def to_dict(self) -> dict:
        return {
            "escalation_id": self.escalation_id,
            "message": self.message.to_dict(),
            "intent": self.intent.to_dict(),
            "created_at_ns": self.created_at_ns,
            "status": self.status.value,
            "resolver": self.resolver,
            "note": self.note,
            "approval_tokens": [t.to_dict() for t in self.approval_tokens],
        }


class EscalationQueue:
    """Serialized queue state; notification fan-out via an optional callable."""

    def __init__(
        self,
        log: TraceLog | None = None,
        notifier: Callable[[str, dict], None] | None = None,
        clock: Callable[[], int] = time.time_ns,
        token_ttl_s: float = 3600.0,
        pending_ttl_s: float = 86400.0,
    ) -> None:
        self._lock = threading.Lock()
        self._items: dict[str, PendingEscalation] = {}
        self._order: list[str] = []
        self._tokens: dict[str, ApprovalToken] = {}
        self._log = log
        self._notifier = notifier
        self._clock = clock
        self._token_ttl_ns = int(token_ttl_s * 1e9)
        self._pending_ttl_ns = int(pending_ttl_s * 1e9)
        self._seq = 0

    def set_notifier(self, notifier: Callable[[str, dict], None] | None) -> None:
        self._notifier = notifier

    # -- operations --

    def enqueue(self, decision: ComplianceDecision, intent: IntentDescriptor) -> PendingEscalation:
        if decision.outcome is not Outcome.ESCALATE or decision.escalation is None:
            raise ValueError("only ESCALATE decisions can be enqueued")
        with self._lock:
            self._seq += 1
            item = PendingEscalation(
                escalation_id=f"esc-{self._seq:06d}",
                message=decision.escalation,
                intent=intent,
                created_at_ns=self._clock(),
            )
            self._items[item.escalation_id] = item
            self._order.append(item.escalation_id)
        self._audit(
            "escalation_enqueued",
            actor=intent.agent_id,
            detail={
                "escalation_id": item.escalation_id,
                "agent_id": intent.agent_id,
                "workflow_id": intent.workflow_id,
                "action_class": intent.action_class,
                "triggering_rule_ids": list(decision.escalation.triggering_rule_ids),
                "trigger_kind": decision.escalation.trigger_kind.value,
            },
        )
        self._notify("escalation.pending", item.to_dict())
        return item

    def resolve(self, escalation_id: str, verdict: str, operator_id: str, note: str = "") -> PendingEscalation:
        """PENDING -> APPROVED/DENIED, exactly once; APPROVED mints one
        token per triggering rule."""
        verdict_status = EscalationStatus(verdict.upper())
        if verdict_status not in (EscalationStatus.APPROVED, EscalationStatus.DENIED):
            raise ValueError("verdict must be APPROVED or DENIED")
        with self._lock:
            item = self._items.get(escalation_id)
            if item is None:
                raise EscalationNotFoundError(f"no such escalation: {escalation_id}")
            if item.status in _TERMINAL:
                raise AlreadyResolvedError(f"{escalation_id} already {item.status.value}")
            tokens: tuple[ApprovalToken, ...] = ()
            if verdict_status is EscalationStatus.APPROVED:
                expires = self._clock() + self._token_ttl_ns
                tokens = tuple(
                    ApprovalToken(rule_id=rid, token=secrets.token_hex(16), expires_at_ns=expires)
                    for rid in item.message.triggering_rule_ids
                )
                for tok in tokens:
                    self._tokens[tok.token] = tok
            item = replace(item, status=verdict_status, resolver=operator_id, note=note, approval_tokens=tokens)
            self._items[escalation_id] = item
        self._audit(
            "escalation_resolved",
            actor=operator_id,
            detail={
                "escalation_id": escalation_id,
                "verdict": verdict_status.value,
                "note": note,
                "rule_ids": list(item.message.triggering_rule_ids),
            },
        )
        self._notify("escalation.resolved", item.to_dict())
        return item

    def get(self, escalation_id: str) -> PendingEscalation:
        self.expire_stale()
        with self._lock:
            item = self._items.get(escalation_id)
        if item is None:
            raise EscalationNotFoundError(f"no such escalation: {escalation_id}")
        return item

    def list(self, status: EscalationStatus | str | None = None) -> list[PendingEscalation]:
        self.expire_stale()
        wanted = EscalationStatus(status.upper()) if isinstance(status, str) else status
        with self._lock:
            items = [self._items[eid] for eid in self._order]
        if wanted is not None:
            items = [i for i in items if i.status is wanted]
        return items

    def expire_stale(self) -> int:
        """PENDING items older than the pending TTL become EXPIRED."""
        now = self._clock()
        expired = []
        with self._lock:
            for eid, item in self._items.items():
                if item.status is EscalationStatus.PENDING and now - item.created_at_ns > self._pending_ttl_ns:
                    self._items[eid] = replace(item, status=EscalationStatus.EXPIRED)
                    expired.append(eid)
        for eid in expired:
            self._notify("escalation.expired", self._items[eid].to_dict())
        return len(expired)

    # -- token check --

    def validate_token(self, rule_id: str, token: str) -> bool:
        """True iff the token was minted for exactly this rule and is unexpired."""
        with self._lock:
            tok = self._tokens.get(token)
        if tok is None or tok.rule_id != rule_id:
            return False
        return self._clock() <= tok.expires_at_ns

    # -- internals --

    def _audit(self, kind: str, actor: str, detail: dict) -> None:
        if self._log is not None:
            self._log.append_event(kind, actor, detail)

    def _notify(self, event: str, payload: dict) -> None:
        if self._notifier is not None:
            self._notifier(event, payload)
