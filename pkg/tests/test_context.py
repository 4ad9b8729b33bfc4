"""Snapshot isolation and operator mutations of runtime context."""

from __future__ import annotations

import threading

import pytest

from agentgov import LiveContext, applicable_rules


class TestSnapshot:
    def test_snapshot_survives_later_signal_mutation(self):
        live = LiveContext(signals={"supplier_disruption": True})
        snap = live.snapshot()
        live.set_signal("supplier_disruption", False)
        assert snap.signals["supplier_disruption"] is True

    def test_empty_live_state(self):
        snap = LiveContext().snapshot()
        assert dict(snap.signals) == {}
        assert dict(snap.registries) == {}

    def test_snapshot_registry_is_frozen_copy(self):
        # oracle: mutate after snapshot, snapshot must not move
        live = LiveContext(registries={"verified_suppliers": {"S1", "S2"}})
        snap = live.snapshot()
        live.update_registry("verified_suppliers", {"S1", "S2", "S3"})
        assert snap.registries["verified_suppliers"] == frozenset({"S1", "S2"})
        assert live.snapshot().registries["verified_suppliers"] == frozenset({"S1", "S2", "S3"})

    def test_snapshot_ids_are_unique(self):
        live = LiveContext()
        assert live.snapshot().snapshot_id != live.snapshot().snapshot_id


class TestMutations:
    def test_set_signal_validates_key_and_kind(self):
        live = LiveContext()
        with pytest.raises(ValueError):
            live.set_signal("", True)
        with pytest.raises(ValueError):
            live.set_signal("k", ["not", "scalar"])

    def test_mutations_emit_audit_events(self):
        events = []
        live = LiveContext(recorder=lambda kind, actor, detail: events.append((kind, actor, detail)))
        live.set_signal("supplier_disruption", True, actor="ops-1")
        live.update_registry("verified_suppliers", {"S1"}, actor="ops-2")
        assert events[0] == ("context_signal", "ops-1", {"key": "supplier_disruption", "value": True})
        assert events[1] == ("context_registry", "ops-2", {"name": "verified_suppliers", "members": ["S1"]})

    def test_disruption_signal_toggles_situational_rule(self, flowr_doc, flowr_live_context):
        live = flowr_live_context
        live.set_signal("supplier_disruption", True)
        ids = [r.id for r in applicable_rules(flowr_doc, "inventory_replenishment", "flowr", live.snapshot())]
        assert "R7" in ids
        live.set_signal("supplier_disruption", False)
        ids = [r.id for r in applicable_rules(flowr_doc, "inventory_replenishment", "flowr", live.snapshot())]
        assert "R7" not in ids


class TestConcurrency:
    def test_snapshots_linearize_single_key_writes(self):
        """Writers bump a counter signal; every snapshot must hold a value
        that was actually written, and values seen by one reader never go
        backwards (sequential oracle for single-key writes)."""
        live = LiveContext(signals={"counter": 0})
        stop = threading.Event()
        written = []

        def writer():
            for i in range(1, 2001):
                live.set_signal("counter", i)
                written.append(i)
            stop.set()

        failures = []

        def reader():
            last = -1
            while not stop.is_set():
                value = live.snapshot().signals["counter"]
                if value < last:
                    failures.append((last, value))
                last = value

        threads = [threading.Thread(target=writer)] + [threading.Thread(target=reader) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not failures
        assert live.snapshot().signals["counter"] == 2000
