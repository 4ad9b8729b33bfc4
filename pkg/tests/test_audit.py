"""Hash-chained trace log: appends, queries, verification, corruption."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentgov import TraceLog
from agentgov.audit import (
    GENESIS_HASH,
    canonical_json,
    load_records,
    record_digest,
    validate_record,
    verify_records,
)


def append_sample_trace(log: TraceLog, i: int = 0, decision: str = "PROCEED"):
    return log.append_trace(
        agent_id="demand_forecasting",
        workflow_id="flowr",
        intent={"intent_id": f"it-{i}", "description": "read sales data"},
        rules_retrieved=["R1", "R2", "R5"],
        ruleset_version=1,
        rules_cited=[],
        reasoning="all checks satisfied",
        decision=decision,
        round_index=1,
        deliberator_name="reference",
        prompt_template_version="ref-1",
    )


class TestChain:
    def test_first_record_links_to_genesis(self, mem_log):
        rec = append_sample_trace(mem_log)
        assert rec.prev_hash == GENESIS_HASH

    def test_second_record_links_to_first(self, mem_log):
        first = append_sample_trace(mem_log, 0)
        second = append_sample_trace(mem_log, 1)
        assert second.prev_hash == first.record_hash

    def test_untouched_log_verifies(self, mem_log):
        for i in range(10):
            append_sample_trace(mem_log, i)
        report = mem_log.verify_chain()
        assert report.ok and report.records_checked == 10

    def test_trace_ids_unique_and_ordered(self, mem_log):
        ids = [append_sample_trace(mem_log, i).trace_id for i in range(5)]
        assert ids == sorted(ids) and len(set(ids)) == 5


class TestFileStorage:
    def test_records_survive_reopen(self, tmp_path):
        path = tmp_path / "traces.log"
        log = TraceLog(path)
        append_sample_trace(log, 0)
        append_sample_trace(log, 1)
        log.close()

        reopened = TraceLog(path)
        assert len(reopened) == 2
        assert reopened.verify_chain().ok
        third = append_sample_trace(reopened, 2)
        assert third.prev_hash == reopened.records()[-2]["record_hash"]
        reopened.close()

    def test_export_lines_match_file_bytes(self, tmp_path):
        path = tmp_path / "traces.log"
        log = TraceLog(path)
        for i in range(3):
            append_sample_trace(log, i)
        exported = "\n".join(log.export_lines()) + "\n"
        assert path.read_text(encoding="utf-8") == exported
        log.close()


def corrupt_line(path, index, mutate):
    """Scripted corruption harness: rewrite one stored line."""
    lines = path.read_text(encoding="utf-8").splitlines()
    record = json.loads(lines[index])
    mutate(record)
    lines[index] = canonical_json(record)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestCorruptionDetection:
    @pytest.fixture()
    def stored(self, tmp_path):
        path = tmp_path / "traces.log"
        log = TraceLog(path)
        for i in range(8):
            append_sample_trace(log, i)
        log.close()
        return path

    def test_bit_flip_detected_at_index(self, stored):
        k = 3

        def flip(record):
            record["reasoning"] = record["reasoning"][:-1] + ("x" if record["reasoning"][-1] != "x" else "y")

        corrupt_line(stored, k, flip)
        report = verify_records(load_records(stored))
        assert not report.ok
        assert report.first_mismatch_index == k
        assert report.first_mismatch_trace_id == f"tr-{k + 1:08d}"

    def test_deletion_detected_at_successor(self, stored):
        k = 2
        lines = stored.read_text(encoding="utf-8").splitlines()
        del lines[k]
        stored.write_text("\n".join(lines) + "\n", encoding="utf-8")
        report = verify_records(load_records(stored))
        assert not report.ok
        # the break surfaces at the record that originally followed k
        assert report.first_mismatch_index == k
        assert report.first_mismatch_trace_id == f"tr-{k + 2:08d}"

    def test_reorder_detected(self, stored):
        k = 4
        lines = stored.read_text(encoding="utf-8").splitlines()
        lines[k], lines[k + 1] = lines[k + 1], lines[k]
        stored.write_text("\n".join(lines) + "\n", encoding="utf-8")
        report = verify_records(load_records(stored))
        assert not report.ok
        assert report.first_mismatch_index == k
        assert report.first_mismatch_trace_id == f"tr-{k + 2:08d}"

    @settings(max_examples=25, deadline=None)
    @given(index=st.integers(min_value=0, max_value=7), field=st.sampled_from(["reasoning", "decision", "agent_id"]))
    def test_any_single_field_edit_detected(self, tmp_path_factory, index, field):
        path = tmp_path_factory.mktemp("chain") / "traces.log"
        log = TraceLog(path)
        for i in range(8):
            append_sample_trace(log, i)
        log.close()
        corrupt_line(path, index, lambda r: r.__setitem__(field, r[field] + "!"))
        report = verify_records(load_records(path))
        assert not report.ok and report.first_mismatch_index == index


class TestQueries:
    def test_decision_filter(self, mem_log):
        append_sample_trace(mem_log, 0, decision="PROCEED")
        append_sample_trace(mem_log, 1, decision="ESCALATE")
        append_sample_trace(mem_log, 2, decision="ESCALATE")
        got = mem_log.query_traces(decision="ESCALATE")
        assert len(got) == 2
        # hyphenated spelling tolerated on the wire
        assert len(mem_log.query_traces(decision="escalate")) == 2

    def test_empty_filter_returns_all(self, mem_log):
        for i in range(4):
            append_sample_trace(mem_log, i)
        assert len(mem_log.query_traces()) == 4

    def test_pagination_cursor(self, mem_log):
        records = [append_sample_trace(mem_log, i) for i in range(6)]
        first = mem_log.query_traces(limit=2)
        assert [r.trace_id for r in first] == [records[0].trace_id, records[1].trace_id]
        rest = mem_log.query_traces(after=(first[-1].timestamp_ns, first[-1].trace_id))
        assert [r.trace_id for r in rest] == [r.trace_id for r in records[2:]]

    def test_operator_events_share_chain_but_not_trace_queries(self, mem_log):
        append_sample_trace(mem_log, 0)
        mem_log.append_event("context_signal", "ops", {"key": "supplier_disruption", "value": True})
        assert len(mem_log.query_traces()) == 1
        assert len(mem_log) == 2
        assert mem_log.verify_chain().ok


class TestValidation:
    def test_complete_governance_record_passes(self, mem_log):
        append_sample_trace(mem_log)
        good, total = mem_log.completeness()
        assert (good, total) == (1, 1)

    def test_operator_record_passes(self, mem_log):
        mem_log.append_event("escalation_resolved", "ops", {"escalation_id": "esc-000001"})
        good, total = mem_log.completeness()
        assert (good, total) == (1, 1)

    def test_missing_fields_reported(self):
        problems = validate_record({"kind": "governance", "trace_id": "tr-1"})
        assert problems
        assert any("reasoning" in p for p in problems)

    def test_unknown_kind_reported(self):
        assert validate_record({"kind": "mystery"}) == ["unknown record kind: 'mystery'"]

    def test_zero_rule_retrieval_is_still_complete(self, mem_log):
        mem_log.append_trace(
            agent_id="a",
            workflow_id="w",
            intent={"intent_id": "it-1", "description": "anything"},
            rules_retrieved=[],
            ruleset_version=1,
            rules_cited=[],
            reasoning="no rules applied; default proceed",
            decision="PROCEED",
            round_index=1,
            deliberator_name="reference",
            prompt_template_version="ref-1",
        )
        good, total = mem_log.completeness()
        assert (good, total) == (1, 1)


class TestCanonicalForm:
    def test_digest_is_stable_under_key_order(self):
        a = {"b": 1, "a": {"y": True, "x": "s"}, "record_hash": "ignored"}
        b = {"record_hash": "other", "a": {"x": "s", "y": True}, "b": 1}
        assert record_digest(a) == record_digest(b)

    def test_canonical_json_shape(self):
        assert canonical_json({"b": 1, "a": [1.5, "é"]}) == '{"a":[1.5,"é"],"b":1}'
