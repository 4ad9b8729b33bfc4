"""Rule hierarchy: loading, retrieval, predicates, validation, lint, conflicts."""

from __future__ import annotations

import itertools
import json
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentgov import (
    ActivationPredicate,
    Comparison,
    ComparisonOp,
    GovernanceLayer,
    MachineConstraint,
    Modality,
    Rule,
    RuleSetDocument,
    RuleStore,
    RuntimeContext,
    Scope,
    applicable_rules,
    detect_conflicts,
    evaluate_predicate,
    lint_rule,
    load_ruleset,
    validate_ruleset,
)
from agentgov.errors import (
    PredicateTypeError,
    RulesetParseError,
    RulesetSchemaError,
    VersionConflictError,
)
from agentgov.rules import document_to_dict

from .conftest import RULES_PATH


def rule(rid, layer, *, workflow_ids=(), agent_ids=(), text="Keep the action within policy.",
         rationale="because the policy says so", constraint=None, predicate=None, enabled=True):
    return Rule(
        id=rid,
        layer=layer,
        scope=Scope(workflow_ids=frozenset(workflow_ids), agent_ids=frozenset(agent_ids)),
        text=text,
        rationale=rationale,
        constraint=constraint,
        predicate=predicate,
        enabled=enabled,
    )


def doc_of(*rules, version=1):
    return RuleSetDocument(version=version, rules=tuple(rules), metadata={"author": "test"})


# ---------------------------------------------------------------------------
# load_ruleset


class TestLoadRuleset:
    def test_flowr_document_layer_counts(self, flowr_doc):
        by_layer = {}
        for r in flowr_doc.rules:
            by_layer.setdefault(r.layer, []).append(r.id)
        assert sorted(by_layer[GovernanceLayer.GLOBAL]) == ["R1", "R2"]
        assert sorted(by_layer[GovernanceLayer.WORKFLOW]) == ["R3", "R4"]
        assert sorted(by_layer[GovernanceLayer.AGENT]) == ["R5", "R6"]
        assert sorted(by_layer[GovernanceLayer.SITUATIONAL]) == ["R7"]
        assert flowr_doc.version == 1

    def test_empty_rules_list_is_valid(self):
        doc = load_ruleset(json.dumps({"version": 1, "metadata": {}, "rules": []}))
        assert doc.rules == ()

    def test_situational_rule_without_predicate_names_offender(self):
        body = {
            "version": 1,
            "rules": [
                {
                    "id": "S9",
                    "layer": "SITUATIONAL",
                    "scope": {"workflow_ids": [], "agent_ids": []},
                    "text": "During an audit, pause external calls.",
                    "rationale": "audits need a stable state",
                }
            ],
        }
        with pytest.raises(RulesetSchemaError) as err:
            load_ruleset(json.dumps(body))
        assert any(v.code == "MISSING_PREDICATE" and v.rule_id == "S9" for v in err.value.violations)

    def test_malformed_bytes_is_parse_error(self):
        with pytest.raises(RulesetParseError):
            load_ruleset(b"{not json")

    def test_round_trips_through_dict_form(self, flowr_doc):
        again = load_ruleset(json.dumps(document_to_dict(flowr_doc)))
        assert again == flowr_doc


# ---------------------------------------------------------------------------
# evaluate_predicate


class TestEvaluatePredicate:
    def test_disruption_flag_true(self):
        p = ActivationPredicate((Comparison("supplier_disruption", ComparisonOp.EQ, True),))
        ctx = RuntimeContext.of(signals={"supplier_disruption": True})
        assert evaluate_predicate(p, ctx) is True

    def test_missing_key_is_false(self):
        p = ActivationPredicate((Comparison("supplier_disruption", ComparisonOp.EQ, True),))
        assert evaluate_predicate(p, RuntimeContext.empty()) is False

    def test_conjunction_truth_table(self):
        # oracle: enumerate all four boolean combinations by hand
        p = ActivationPredicate(
            (
                Comparison("risk", ComparisonOp.EQ, "high"),
                Comparison("audit_active", ComparisonOp.EQ, True),
            )
        )
        for risk_high, audit in itertools.product([True, False], repeat=2):
            ctx = RuntimeContext.of(
                signals={"risk": "high" if risk_high else "low", "audit_active": audit}
            )
            assert evaluate_predicate(p, ctx) is (risk_high and audit)

    def test_ordered_op_kind_mismatch_raises(self):
        p = ActivationPredicate((Comparison("limit", ComparisonOp.GT, 10),))
        ctx = RuntimeContext.of(signals={"limit": "plenty"})
        with pytest.raises(PredicateTypeError):
            evaluate_predicate(p, ctx)

    def test_bool_does_not_equal_number(self):
        p = ActivationPredicate((Comparison("flag", ComparisonOp.EQ, 1),))
        assert evaluate_predicate(p, RuntimeContext.of(signals={"flag": True})) is False

    def test_in_list_membership(self):
        p = ActivationPredicate((Comparison("region", ComparisonOp.IN, ("eu", "us")),))
        assert evaluate_predicate(p, RuntimeContext.of(signals={"region": "eu"})) is True
        assert evaluate_predicate(p, RuntimeContext.of(signals={"region": "apac"})) is False


# ---------------------------------------------------------------------------
# applicable_rules


class TestApplicableRules:
    def test_s1_forecasting_retrieval(self, flowr_doc, flowr_ctx):
        got = applicable_rules(flowr_doc, "demand_forecasting", "flowr", flowr_ctx)
        assert [r.id for r in got] == ["R1", "R2", "R5"]

    def test_s2_procurement_retrieval(self, flowr_doc, flowr_ctx):
        got = applicable_rules(flowr_doc, "procurement", "flowr", flowr_ctx)
        assert [r.id for r in got] == ["R1", "R2", "R3", "R6"]

    def test_s4_disruption_activates_situational_rule(self, flowr_doc, disruption_ctx):
        got = applicable_rules(flowr_doc, "inventory_replenishment", "flowr", disruption_ctx)
        assert "R7" in [r.id for r in got]

    def test_situational_rule_dormant_without_signal(self, flowr_doc, flowr_ctx):
        got = applicable_rules(flowr_doc, "inventory_replenishment", "flowr", flowr_ctx)
        assert "R7" not in [r.id for r in got]

    def test_empty_document_yields_empty_list(self, flowr_ctx):
        assert applicable_rules(doc_of(), "anyone", "anywhere", flowr_ctx) == []

    def test_disabled_rules_are_not_retrieved(self, flowr_ctx):
        r = rule("G1", GovernanceLayer.GLOBAL, enabled=False)
        assert applicable_rules(doc_of(r), "a", "w", flowr_ctx) == []

    def test_sorted_by_layer_rank_then_id(self, flowr_ctx):
        rules = [
            rule("Z1", GovernanceLayer.AGENT, agent_ids={"a"}),
            rule("A1", GovernanceLayer.AGENT, agent_ids={"a"}),
            rule("M1", GovernanceLayer.GLOBAL),
            rule("B1", GovernanceLayer.WORKFLOW, workflow_ids={"w"}),
        ]
        got = applicable_rules(doc_of(*rules), "a", "w", flowr_ctx)
        assert [r.id for r in got] == ["M1", "B1", "A1", "Z1"]

    def test_pure_function_identical_outputs_across_threads(self, flowr_doc, flowr_ctx):
        expected = [r.id for r in applicable_rules(flowr_doc, "procurement", "flowr", flowr_ctx)]
        results = []

        def worker():
            for _ in range(200):
                got = [r.id for r in applicable_rules(flowr_doc, "procurement", "flowr", flowr_ctx)]
                results.append(got == expected)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(results)

    @settings(max_examples=60, deadline=None)
    @given(
        workflow_ids=st.frozensets(st.sampled_from(["w1", "w2", "w3"]), max_size=2),
        agent_ids=st.frozensets(st.sampled_from(["a1", "a2", "a3"]), max_size=2),
        query_workflow=st.sampled_from(["w1", "w2", "w3", "w4"]),
        query_agent=st.sampled_from(["a1", "a2", "a3", "a4"]),
    )
    def test_scope_soundness(self, workflow_ids, agent_ids, query_workflow, query_agent):
        # a scoped rule never leaks outside its selectors
        r = Rule(
            id="X1",
            layer=GovernanceLayer.SITUATIONAL if False else GovernanceLayer.GLOBAL,
            scope=Scope(workflow_ids=workflow_ids, agent_ids=agent_ids),
            text="scoped rule",
        )
        doc = RuleSetDocument(version=1, rules=(r,))
        got = applicable_rules(doc, query_agent, query_workflow, RuntimeContext.empty())
        should_match = (not workflow_ids or query_workflow in workflow_ids) and (
            not agent_ids or query_agent in agent_ids
        )
        assert (len(got) == 1) is should_match

    def test_every_enabled_global_rule_in_every_result(self, flowr_doc, flowr_ctx, disruption_ctx):
        for agent, wf, ctx in [
            ("demand_forecasting", "flowr", flowr_ctx),
            ("procurement", "flowr", flowr_ctx),
            ("someone_else", "other_workflow", disruption_ctx),
        ]:
            ids = [r.id for r in applicable_rules(flowr_doc, agent, wf, ctx)]
            assert {"R1", "R2"} <= set(ids)
            ranks = [r.layer.rank for r in applicable_rules(flowr_doc, agent, wf, ctx)]
            assert ranks == sorted(ranks)


# ---------------------------------------------------------------------------
# validate_ruleset


class TestValidateRuleset:
    def test_flowr_document_is_clean(self, flowr_doc):
        assert validate_ruleset(flowr_doc) == []

    def test_duplicate_id(self):
        doc = doc_of(rule("R1", GovernanceLayer.GLOBAL), rule("R1", GovernanceLayer.GLOBAL))
        codes = [(v.code, v.rule_id) for v in validate_ruleset(doc)]
        assert ("DUPLICATE_ID", "R1") in codes

    def test_agent_rule_with_empty_agent_scope(self):
        doc = doc_of(rule("A1", GovernanceLayer.AGENT, workflow_ids={"w"}))
        codes = [(v.code, v.rule_id) for v in validate_ruleset(doc)]
        assert ("EMPTY_AGENT_SCOPE", "A1") in codes

    def test_workflow_rule_with_empty_workflow_scope(self):
        doc = doc_of(rule("W1", GovernanceLayer.WORKFLOW, agent_ids={"a"}))
        codes = [(v.code, v.rule_id) for v in validate_ruleset(doc)]
        assert ("EMPTY_WORKFLOW_SCOPE", "W1") in codes

    def test_global_rule_with_scope_selectors(self):
        doc = doc_of(rule("G1", GovernanceLayer.GLOBAL, workflow_ids={"w"}))
        codes = [(v.code, v.rule_id) for v in validate_ruleset(doc)]
        assert ("NONEMPTY_GLOBAL_SCOPE", "G1") in codes

    def test_predicate_on_non_situational_rule(self):
        p = ActivationPredicate((Comparison("k", ComparisonOp.EQ, 1),))
        doc = doc_of(rule("G1", GovernanceLayer.GLOBAL, predicate=p))
        codes = [(v.code, v.rule_id) for v in validate_ruleset(doc)]
        assert ("UNEXPECTED_PREDICATE", "G1") in codes


# ---------------------------------------------------------------------------
# lint_rule


class TestLintRule:
    def test_r1_has_rationale(self, flowr_doc):
        warnings = lint_rule(flowr_doc.rule("R1"))
        assert "MISSING_RATIONALE" not in [w.code for w in warnings]

    def test_bare_prohibition_without_rationale(self):
        r = rule(
            "X1",
            GovernanceLayer.GLOBAL,
            text="Do not transmit user data externally",
            rationale="",
        )
        codes = [w.code for w in lint_rule(r)]
        assert codes == ["MISSING_RATIONALE", "NEGATIVE_ONLY_FRAMING"]

    def test_clean_rule_yields_nothing(self):
        r = rule(
            "X2",
            GovernanceLayer.GLOBAL,
            text="Share reports through the approved export channel.",
            rationale="because the export channel applies retention policy",
        )
        assert lint_rule(r) == []

    def test_flowr_rules_are_lint_clean(self, flowr_doc):
        for r in flowr_doc.rules:
            assert lint_rule(r) == [], r.id

    def test_overbroad_global_constraint(self):
        c = MachineConstraint(action_classes=frozenset(), modality=Modality.FORBID)
        r = rule("G9", GovernanceLayer.GLOBAL, text="Stop everything.", rationale="why not", constraint=c)
        assert "OVERBROAD_SCOPE" in [w.code for w in lint_rule(r)]

    def test_global_require_approval_catchall_is_fine(self, flowr_doc):
        # R1 is exactly this shape
        assert "OVERBROAD_SCOPE" not in [w.code for w in lint_rule(flowr_doc.rule("R1"))]


# ---------------------------------------------------------------------------
# detect_conflicts


def constraint(modality, *classes, condition=()):
    return MachineConstraint(action_classes=frozenset(classes), modality=modality, condition=condition)


def brute_force_conflicts(doc):
    """Independent pairwise oracle mirroring the documented definition."""
    contradictory = {
        frozenset({Modality.ALLOW, Modality.FORBID}),
        frozenset({Modality.ALLOW, Modality.REQUIRE_APPROVAL}),
    }

    def overlap(x, y):
        return not x or not y or bool(set(x) & set(y))

    out = set()
    rs = [r for r in doc.rules if r.constraint is not None]
    for a in rs:
        for b in rs:
            if a.id >= b.id:
                continue
            if frozenset({a.constraint.modality, b.constraint.modality}) not in contradictory:
                continue
            if not overlap(a.scope.workflow_ids, b.scope.workflow_ids):
                continue
            if not overlap(a.scope.agent_ids, b.scope.agent_ids):
                continue
            if not overlap(a.constraint.action_classes, b.constraint.action_classes):
                continue
            winner = min((a, b), key=lambda r: (r.layer.rank, r.id))
            out.add((a.id, b.id, winner.id))
    return out


class TestDetectConflicts:
    def test_global_forbid_wins_over_agent_allow(self):
        a = rule("G1", GovernanceLayer.GLOBAL, constraint=constraint(Modality.FORBID, "x.do"))
        b = rule("A1", GovernanceLayer.AGENT, agent_ids={"a"}, constraint=constraint(Modality.ALLOW, "x.do"))
        reports = detect_conflicts(doc_of(a, b))
        assert len(reports) == 1
        assert reports[0].winner_id == "G1"

    def test_disjoint_action_classes(self):
        a = rule("G1", GovernanceLayer.GLOBAL, constraint=constraint(Modality.FORBID, "x.do"))
        b = rule("A1", GovernanceLayer.AGENT, agent_ids={"a"}, constraint=constraint(Modality.ALLOW, "y.do"))
        assert detect_conflicts(doc_of(a, b)) == []

    def test_three_rule_chain_matches_pairwise_oracle(self):
        g = rule("G1", GovernanceLayer.GLOBAL, constraint=constraint(Modality.REQUIRE_APPROVAL, "x.do"))
        w = rule("W1", GovernanceLayer.WORKFLOW, workflow_ids={"w"}, constraint=constraint(Modality.ALLOW, "x.do"))
        a = rule("A1", GovernanceLayer.AGENT, agent_ids={"a"}, constraint=constraint(Modality.FORBID, "x.do"))
        doc = doc_of(g, w, a)
        reports = detect_conflicts(doc)
        got = {(r.first_rule_id, r.second_rule_id, r.winner_id) for r in reports}
        assert got == brute_force_conflicts(doc)
        assert len(reports) == 2
        winners = {frozenset({r.first_rule_id, r.second_rule_id}): r.winner_id for r in reports}
        assert winners[frozenset({"G1", "W1"})] == "G1"
        assert winners[frozenset({"W1", "A1"})] == "W1"

    def test_reversing_rule_order_is_stable(self):
        g = rule("G1", GovernanceLayer.GLOBAL, constraint=constraint(Modality.FORBID, "x.do"))
        a = rule("A1", GovernanceLayer.AGENT, agent_ids={"a"}, constraint=constraint(Modality.ALLOW, "x.do"))
        fwd = detect_conflicts(doc_of(g, a))
        rev = detect_conflicts(doc_of(a, g))
        assert fwd == rev

    def test_rules_without_constraints_never_reported(self, flowr_doc):
        assert detect_conflicts(flowr_doc) == []


# ---------------------------------------------------------------------------
# RuleStore


class TestRuleStore:
    def test_versions_increment_and_stay_immutable(self, flowr_doc):
        store = RuleStore(flowr_doc)
        assert store.active().version == 1
        v2 = store.propose(
            {"metadata": {"author": "ops"}, "rules": [json.loads(RULES_PATH.read_text())["rules"][0]]}
        )
        store.activate(v2)
        assert store.active().version == 2
        assert store.get(1) == flowr_doc

    def test_activation_requires_next_version(self, flowr_doc):
        store = RuleStore(flowr_doc)
        bad = RuleSetDocument(version=5, rules=())
        with pytest.raises(VersionConflictError):
            store.activate(bad)

    def test_activation_rejects_invalid_document(self, flowr_doc):
        store = RuleStore(flowr_doc)
        bad = doc_of(rule("A1", GovernanceLayer.AGENT), version=2)  # empty agent scope
        with pytest.raises(RulesetSchemaError):
            store.activate(bad)
