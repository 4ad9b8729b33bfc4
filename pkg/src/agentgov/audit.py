"""Append-only, hash-chained reasoning-trace log.

Every governance round and every operator action becomes one record in a
single chain. Records are newline-delimited canonical JSON; each record's
hash covers all of its fields plus the previous record's hash, so any
in-place edit, deletion, or reorder is detectable by recomputation.

Canonical serialization (documented in docs/trace_format.md): UTF-8 JSON
with sorted keys, separators ``,``/``:``, no ASCII escaping, integers in
decimal, floats in Python shortest-round-trip form. The digest is SHA-256,
lower-case hex. The genesis previous-hash is 64 zeros.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import AuditStorageError

GENESIS_HASH = "0" * 64

KIND_GOVERNANCE = "governance"
OPERATOR_KINDS = (
    "context_signal",
    "context_registry",
    "escalation_enqueued",
    "escalation_resolved",
    "ruleset_activated",
)

_GOVERNANCE_REQUIRED = (
    "trace_id",
    "timestamp_ns",
    "agent_id",
    "workflow_id",
    "intent",
    "reasoning",
    "decision",
    "deliberator_name",
    "prompt_template_version",
    "prev_hash",
    "record_hash",
)

_EVENT_REQUIRED = ("trace_id", "timestamp_ns", "actor", "detail", "prev_hash", "record_hash")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def record_digest(record: Mapping[str, Any]) -> str:
    """SHA-256 over the canonical form of the record minus its own hash."""
    body = {k: v for k, v in record.items() if k != "record_hash"}
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TraceRecord:
    """One governance-round entry, as chained into the log."""

    trace_id: str
    timestamp_ns: int
    agent_id: str
    workflow_id: str
    intent: Mapping[str, Any]
    rules_retrieved: tuple[str, ...]
    ruleset_version: int
    rules_cited: tuple[str, ...]
    reasoning: str
    decision: str
    round_index: int
    deliberator_name: str
    prompt_template_version: str
    prev_hash: str
    record_hash: str

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "TraceRecord":
        return cls(
            trace_id=record["trace_id"],
            timestamp_ns=record["timestamp_ns"],
            agent_id=record["agent_id"],
            workflow_id=record["workflow_id"],
            intent=record["intent"],
            rules_retrieved=tuple(record["rules_retrieved"]),
            ruleset_version=record["ruleset_version"],
            rules_cited=tuple(record["rules_cited"]),
            reasoning=record["reasoning"],
            decision=record["decision"],
            round_index=record["round_index"],
            deliberator_name=record["deliberator_name"],
            prompt_template_version=record["prompt_template_version"],
            prev_hash=record["prev_hash"],
            record_hash=record["record_hash"],
        )


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    records_checked: int
    first_mismatch_index: int | None = None
    first_mismatch_trace_id: str | None = None
    message: str = "OK"

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "records_checked": self.records_checked,
            "first_mismatch_index": self.first_mismatch_index,
            "first_mismatch_trace_id": self.first_mismatch_trace_id,
            "message": self.message,
        }


def validate_record(record: Mapping[str, Any]) -> list[str]:
    """Field-presence check; returns the problems, empty = complete.

    Governance records must carry every trace-schema field non-empty;
    rules_retrieved must be present but may legitimately be an empty list
    (a zero-rule retrieval is a recorded fact). Operator records have
    their own required set.
    """
    problems: list[str] = []
    kind = record.get("kind")
    if kind == KIND_GOVERNANCE:
        required = _GOVERNANCE_REQUIRED
        if "rules_retrieved" not in record or not isinstance(record["rules_retrieved"], list):
            problems.append("rules_retrieved missing or not a list")
        if "rules_cited" not in record or not isinstance(record["rules_cited"], list):
            problems.append("rules_cited missing or not a list")
        if not isinstance(record.get("ruleset_version"), int):
            problems.append("ruleset_version missing")
        if not isinstance(record.get("round_index"), int) or record.get("round_index", 0) < 1:
            problems.append("round_index missing or < 1")
    elif kind in OPERATOR_KINDS:
        required = _EVENT_REQUIRED
    else:
        return [f"unknown record kind: {kind!r}"]
    for name in required:
        value = record.get(name)
        if value is None or value == "" or value == {}:
            problems.append(f"{name} missing or empty")
    ts = record.get("timestamp_ns")
    if not isinstance(ts, int) or ts <= 0:
        problems.append("timestamp_ns must be a positive integer")
    return problems


class TraceLog:
    """Single serialized appender over a newline-delimited record file.

    With ``path=None`` the log is memory-only (tests, ephemeral harness
    runs). With a path, records are flushed and fsynced before append
    returns; an existing file is replayed into the in-memory index on
    startup.
    """

    def __init__(
        self,
        path: str | Path | None = None,
        clock: Callable[[], int] = time.time_ns,
        fsync: bool = True,
    ) -> None:
        self._lock = threading.Lock()
        self._clock = clock
        self._fsync = fsync
        self._records: list[dict] = []
        self._last_hash = GENESIS_HASH
        self._seq = 0
        self._path = Path(path) if path is not None else None
        self._fh = None
        self._closed = False
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            if self._path.exists():
                self._replay()
            self._fh = open(self._path, "a", encoding="utf-8")

    def _replay(self) -> None:
        with open(self._path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._records.append(record)
                self._last_hash = record.get("record_hash", self._last_hash)
                self._seq += 1

    def close(self) -> None:
        with self._lock:
            self._closed = True
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    # -- append --

    def _append(self, body: dict) -> dict:
        with self._lock:
            if self._closed:
                raise AuditStorageError("trace log is closed")
            self._seq += 1
            record = dict(body)
            record["trace_id"] = f"tr-{self._seq:08d}"
            record["timestamp_ns"] = self._clock()
            record["prev_hash"] = self._last_hash
            record["record_hash"] = record_digest(record)
            if self._fh is not None:
                try:
                    self._fh.write(canonical_json(record) + "\n")
                    self._fh.flush()
                    if self._fsync:
                        os.fsync(self._fh.fileno())
                except (OSError, ValueError) as exc:
                    self._seq -= 1
                    raise AuditStorageError(f"trace append failed: {exc}") from exc
            self._records.append(record)
            self._last_hash = record["record_hash"]
            return record

    def append_trace(
        self,
        *,
        agent_id: str,
        workflow_id: str,
        intent: Mapping[str, Any],
        rules_retrieved: list[str],
        ruleset_version: int,
        rules_cited: list[str],
        reasoning: str,
        decision: str,
        round_index: int,
        deliberator_name: str,
        prompt_template_version: str,
    ) -> TraceRecord:
        """Chain one governance round; durable before return."""
        record = self._append(
            {
                "kind": KIND_GOVERNANCE,
                "agent_id": agent_id,
                "workflow_id": workflow_id,
                "intent": dict(intent),
                "rules_retrieved": list(rules_retrieved),
                "ruleset_version": ruleset_version,
                "rules_cited": list(rules_cited),
                "reasoning": reasoning,
                "decision": decision,
                "round_index": round_index,
                "deliberator_name": deliberator_name,
                "prompt_template_version": prompt_template_version,
            }
        )
        return TraceRecord.from_record(record)

    def append_event(self, kind: str, actor: str, detail: Mapping[str, Any]) -> dict:
        """Chain an operator/context action alongside governance rounds."""
        if kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown event kind: {kind}")
        return self._append({"kind": kind, "actor": actor, "detail": dict(detail)})

    # -- read --

    def records(self) -> list[dict]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def query_traces(
        self,
        agent_id: str | None = None,
        workflow_id: str | None = None,
        decision: str | None = None,
        rule_id: str | None = None,
        start_ns: int | None = None,
        end_ns: int | None = None,
        after: tuple[int, str] | None = None,
        limit: int | None = None,
    ) -> list[TraceRecord]:
        """Governance records matching every supplied filter, time-ascending.

        ``rule_id`` matches the rules cited by the round's decision;
        ``after`` is a (timestamp_ns, trace_id) cursor for pagination.
        """
        decision_norm = decision.upper().replace("-", "_") if decision else None
        out = []
        for record in self.records():
            if record.get("kind") != KIND_GOVERNANCE:
                continue
            if agent_id is not None and record["agent_id"] != agent_id:
                continue
            if workflow_id is not None and record["workflow_id"] != workflow_id:
                continue
            if decision_norm is not None and record["decision"] != decision_norm:
                continue
            if rule_id is not None and rule_id not in record["rules_cited"]:
                continue
            if start_ns is not None and record["timestamp_ns"] < start_ns:
                continue
            if end_ns is not None and record["timestamp_ns"] > end_ns:
                continue
            out.append(record)
        out.sort(key=lambda r: (r["timestamp_ns"], r["trace_id"]))
        if after is not None:
            cursor = (after[0], after[1])
            out = [r for r in out if (r["timestamp_ns"], r["trace_id"]) > cursor]
        if limit is not None:
            out = out[:limit]
        return [TraceRecord.from_record(r) for r in out]

    # -- integrity --

    def verify_chain(self, start: int = 0, end: int | None = None) -> VerificationReport:
        """Recompute hashes over [start, end) and check linkage.

        Reports the first index (and its trace id) where either the stored
        hash does not match recomputation or the previous-hash link is
        broken.
        """
        records = self.records()
        return verify_records(records, start=start, end=end)

    def export_lines(self) -> list[str]:
        return [canonical_json(r) for r in self.records()]

    def completeness(self) -> tuple[int, int]:
        """(records passing field validation, total records)."""
        records = self.records()
        good = sum(1 for r in records if not validate_record(r))
        return good, len(records)


def verify_records(records: list[Mapping[str, Any]], start: int = 0, end: int | None = None) -> VerificationReport:
    stop = len(records) if end is None else min(end, len(records))
    checked = 0
    for i in range(start, stop):
        record = records[i]
        checked += 1
        expected_prev = GENESIS_HASH if i == 0 else records[i - 1].get("record_hash")
        if record.get("prev_hash") != expected_prev:
            return VerificationReport(
                ok=False,
                records_checked=checked,
                first_mismatch_index=i,
                first_mismatch_trace_id=record.get("trace_id"),
                message=f"previous-hash link broken at index {i}",
            )
        if record.get("record_hash") != record_digest(record):
            return VerificationReport(
                ok=False,
                records_checked=checked,
                first_mismatch_index=i,
                first_mismatch_trace_id=record.get("trace_id"),
                message=f"stored hash does not match recomputation at index {i}",
            )
    return VerificationReport(ok=True, records_checked=checked)


def load_records(path: str | Path) -> list[dict]:
    """Read canonical record lines from a log file (no verification)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
