"""The pre-action governance loop.

For every intent: retrieve the applicable rules, deliberate, and route —
proceed, self-correct (bounded, cycle-checked, re-entering the loop), or
escalate to a human queue. Every deliberation round appends exactly one
trace record, whatever the outcome; a backend failure never proceeds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .audit import TraceLog, TraceRecord
from .context import RuntimeContext
from .deliberation import Deliberator, IRREVERSIBLE_KEY
from .errors import AuditStorageError, GovernanceHaltError, MissingRuleCitationError
from .escalations import EscalationQueue
from .intents import (
    ComplianceDecision,
    Confidence,
    DeliberationVerdict,
    EscalationMessage,
    IntentDescriptor,
    Outcome,
    TriggerKind,
    UNCERTAINTY_RULE_ID,
    canonical_params,
)
from .rules import Rule, RuleSetDocument, applicable_rules


@dataclass(frozen=True)
class EngineConfig:
    """Loop policy knobs.

    max_self_correct: corrections allowed before converting to an
        uncertain escalation; rounds never exceed this + 1.
    default_action: outcome when zero rules apply (PROCEED, or ESCALATE
        for default-deny deployments).
    irreversible_action_classes: classes always treated as irreversible,
        regardless of the caller's flag.
    validate_tokens: strip approval tokens the queue does not recognize
        before deliberation.
    """

    max_self_correct: int = 3
    default_action: Outcome = Outcome.PROCEED
    irreversible_action_classes: frozenset[str] = frozenset()
    validate_tokens: bool = True


def classify_trigger(cited_rules: list[Rule]) -> TriggerKind:
    """PROHIBITED when any cited rule blocks on categorical/threshold
    grounds; IRREVERSIBLE only when irreversibility is the sole ground."""
    if not cited_rules:
        return TriggerKind.UNCERTAIN
    grounds = []
    for rule in cited_rules:
        condition = rule.constraint.condition if rule.constraint else ()
        irreversibility = any(c.key == IRREVERSIBLE_KEY for c in condition)
        grounds.append("irreversible" if irreversibility else "categorical")
    if all(g == "irreversible" for g in grounds):
        return TriggerKind.IRREVERSIBLE
    return TriggerKind.PROHIBITED


def build_escalation(
    intent: IntentDescriptor,
    verdict: DeliberationVerdict,
    rules: list[Rule] | None = None,
) -> EscalationMessage:
    """Escalation message: the action, the triggering rules, the reasoning.

    An uncertain verdict may cite nothing (the synthetic UNCERTAINTY id is
    used); a rule-grounded verdict without citations is a contract error.
    """
    summary = (
        f"{intent.description} "
        f"(agent={intent.agent_id}, action={intent.action_class}, "
        f"parameters={canonical_params(intent.parameters)}, "
        f"irreversible={str(intent.irreversible).lower()})"
    )
    if not verdict.rules_cited:
        if verdict.confidence is Confidence.UNCERTAIN:
            return EscalationMessage(
                intent_summary=summary,
                triggering_rule_ids=(UNCERTAINTY_RULE_ID,),
                reasoning=verdict.reasoning,
                trigger_kind=TriggerKind.UNCERTAIN,
            )
        raise MissingRuleCitationError(
            "escalation verdict cites no rule and is not marked uncertain"
        )
    if verdict.confidence is Confidence.UNCERTAIN:
        trigger = TriggerKind.UNCERTAIN
    else:
        by_id = {r.id: r for r in (rules or [])}
        cited_rules = [by_id[rid] for rid in verdict.rules_cited if rid in by_id]
        trigger = classify_trigger(cited_rules) if cited_rules else TriggerKind.PROHIBITED
    return EscalationMessage(
        intent_summary=summary,
        triggering_rule_ids=verdict.rules_cited,
        reasoning=verdict.reasoning,
        trigger_kind=trigger,
    )


class GovernanceEngine:
    """Runs the loop; owns no rule or context state.

    The trace log is mandatory — a failed append halts the evaluation with
    GovernanceHaltError rather than returning any decision. The escalation
    queue is optional for library use; without it, escalations are
    returned but not parked for review.
    """

    def __init__(
        self,
        log: TraceLog,
        queue: EscalationQueue | None = None,
        config: EngineConfig | None = None,
    ) -> None:
        self.log = log
        self.queue = queue
        self.config = config or EngineConfig()

    # -- the loop --

    def evaluate(
        self,
        intent: IntentDescriptor,
        ctx: RuntimeContext,
        doc: RuleSetDocument,
        deliberator: Deliberator,
    ) -> tuple[ComplianceDecision, TraceRecord]:
        """One full loop execution over a pinned snapshot and document.

        Returns the final decision plus the final round's trace record;
        for a corrected run the record's intent is the approved revision.
        """
        current = self._normalize(intent)
        seen = {canonical_params(current.parameters)}
        cited_in_order: list[str] = []
        rounds = 0
        last_trace: TraceRecord | None = None

        while True:
            rounds += 1
            rules = applicable_rules(doc, current.agent_id, current.workflow_id, ctx)
            verdict = self._deliberate_round(current, rules, ctx, deliberator)

            outcome = verdict.outcome
            if outcome is Outcome.SELF_CORRECT:
                if rounds > self.config.max_self_correct:
                    outcome = Outcome.ESCALATE
                    verdict = self._uncertain(
                        f"{verdict.reasoning}\n[engine] self-correction bound "
                        f"({self.config.max_self_correct}) exceeded; converted to escalation as uncertain"
                    )
                elif canonical_params(verdict.proposed_parameters) in seen:
                    outcome = Outcome.ESCALATE
                    verdict = self._uncertain(
                        f"{verdict.reasoning}\n[engine] proposed revision repeats a previously "
                        "seen intent; converted to escalation as uncertain"
                    )

            for rid in verdict.rules_cited:
                if rid not in cited_in_order:
                    cited_in_order.append(rid)

            last_trace = self._append_round(
                current, rules, doc.version, verdict, outcome, rounds, deliberator
            )

            if outcome is Outcome.PROCEED:
                decision = ComplianceDecision(
                    outcome=Outcome.PROCEED,
                    reasoning=verdict.reasoning,
                    rules_cited=tuple(cited_in_order),
                    deliberation_rounds=rounds,
                )
                return decision, last_trace

            if outcome is Outcome.ESCALATE:
                message = build_escalation(current, verdict, rules)
                decision = ComplianceDecision(
                    outcome=Outcome.ESCALATE,
                    reasoning=verdict.reasoning,
                    rules_cited=tuple(cited_in_order),
                    escalation=message,
                    deliberation_rounds=rounds,
                )
                if self.queue is not None:
                    self.queue.enqueue(decision, current)
                return decision, last_trace

            # self-correct: revise and re-enter with rules re-retrieved
            current = current.with_parameters(verdict.proposed_parameters)
            seen.add(canonical_params(current.parameters))

    # -- internals --

    def _normalize(self, intent: IntentDescriptor) -> IntentDescriptor:
        if intent.action_class in self.config.irreversible_action_classes and not intent.irreversible:
            intent = replace(intent, irreversible=True)
        if self.config.validate_tokens and self.queue is not None and intent.approval_tokens:
            valid = {
                rid: tok
                for rid, tok in intent.approval_tokens.items()
                if self.queue.validate_token(rid, tok)
            }
            if valid != dict(intent.approval_tokens):
                intent = replace(intent, approval_tokens=valid)
        return intent

    def _deliberate_round(
        self,
        intent: IntentDescriptor,
        rules: list[Rule],
        ctx: RuntimeContext,
        deliberator: Deliberator,
    ) -> DeliberationVerdict:
        if not rules:
            if self.config.default_action is Outcome.PROCEED:
                return DeliberationVerdict(
                    outcome=Outcome.PROCEED,
                    reasoning="[engine] no governance rules apply to this intent; default action is proceed",
                )
            return self._uncertain(
                "[engine] no governance rules apply and the configured default action is escalate"
            )
        try:
            verdict = deliberator.deliberate(intent, rules, ctx)
        except Exception as exc:  # fail closed on any backend failure
            return self._uncertain(
                f"[engine] deliberation failed closed ({type(exc).__name__}): {exc}"
            )
        retrieved = {r.id for r in rules}
        if any(rid not in retrieved for rid in verdict.rules_cited):
            # citation soundness: clamp to what was actually retrieved
            verdict = replace(
                verdict,
                rules_cited=tuple(rid for rid in verdict.rules_cited if rid in retrieved),
            )
        return verdict

    def _uncertain(self, reasoning: str) -> DeliberationVerdict:
        return DeliberationVerdict(
            outcome=Outcome.ESCALATE,
            reasoning=reasoning,
            rules_cited=(),
            confidence=Confidence.UNCERTAIN,
        )

    def _append_round(
        self,
        intent: IntentDescriptor,
        rules: list[Rule],
        ruleset_version: int,
        verdict: DeliberationVerdict,
        outcome: Outcome,
        round_index: int,
        deliberator: Deliberator,
    ) -> TraceRecord:
        try:
            return self.log.append_trace(
                agent_id=intent.agent_id,
                workflow_id=intent.workflow_id,
                intent=intent.to_dict(),
                rules_retrieved=[r.id for r in rules],
                ruleset_version=ruleset_version,
                rules_cited=list(verdict.rules_cited),
                reasoning=verdict.reasoning,
                decision=outcome.value,
                round_index=round_index,
                deliberator_name=deliberator.name,
                prompt_template_version=deliberator.prompt_version,
            )
        except AuditStorageError as exc:
            raise GovernanceHaltError(
                f"audit append failed; evaluation halted without a decision: {exc}"
            ) from exc
