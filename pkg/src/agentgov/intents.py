"""Intents, verdicts, decisions, and escalation messages.

Shared vocabulary between the engine, the deliberation backends, and the
escalation queue.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Any

from .context import Scalar

UNCERTAINTY_RULE_ID = "UNCERTAINTY"


class Outcome(Enum):
    PROCEED = "PROCEED"
    SELF_CORRECT = "SELF_CORRECT"
    ESCALATE = "ESCALATE"


class TriggerKind(Enum):
    PROHIBITED = "PROHIBITED"
    IRREVERSIBLE = "IRREVERSIBLE"
    UNCERTAIN = "UNCERTAIN"


class Confidence(Enum):
    UNAMBIGUOUS = "UNAMBIGUOUS"
    UNCERTAIN = "UNCERTAIN"


def canonical_params(params: Mapping[str, Scalar]) -> str:
    """Order-independent canonical form; used for cycle detection and
    the no-verbatim-alternative invariant."""
    return json.dumps(dict(params), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class IntentDescriptor:
    """An agent's candidate action, as submitted for governance.

    alternatives are full parameter maps the agent is willing to substitute,
    best first; approval_tokens map rule id -> token minted by a resolved
    escalation (the engine strips invalid entries before deliberation).
    """

    intent_id: str
    agent_id: str
    workflow_id: str
    action_class: str
    description: str
    parameters: Mapping[str, Scalar] = field(default_factory=dict)
    irreversible: bool = False
    alternatives: tuple[Mapping[str, Scalar], ...] = ()
    approval_tokens: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.intent_id:
            raise ValueError("intent_id must be non-empty")
        if not self.agent_id or not self.workflow_id:
            raise ValueError("agent_id and workflow_id must be non-empty")
        if not self.action_class:
            raise ValueError("action_class must be non-empty")
        if not self.description.strip():
            raise ValueError("description must be non-empty")
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))
        object.__setattr__(self, "approval_tokens", MappingProxyType(dict(self.approval_tokens)))
        primary = canonical_params(self.parameters)
        alts = []
        for alt in self.alternatives:
            if canonical_params(alt) == primary:
                raise ValueError("alternatives must not repeat the primary parameters verbatim")
            alts.append(MappingProxyType(dict(alt)))
        object.__setattr__(self, "alternatives", tuple(alts))

    def with_parameters(self, parameters: Mapping[str, Scalar]) -> "IntentDescriptor":
        """Revision produced by self-correction: only parameters (and the
        alternatives list, pruned of the adopted map) may change."""
        adopted = canonical_params(parameters)
        remaining = tuple(dict(a) for a in self.alternatives if canonical_params(a) != adopted)
        return replace(self, parameters=dict(parameters), alternatives=remaining)

    def to_dict(self) -> dict:
        return {
            "intent_id": self.intent_id,
            "agent_id": self.agent_id,
            "workflow_id": self.workflow_id,
            "action_class": self.action_class,
            "description": self.description,
            "parameters": dict(self.parameters),
            "irreversible": self.irreversible,
            "alternatives": [dict(a) for a in self.alternatives],
            "approval_tokens": dict(self.approval_tokens),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "IntentDescriptor":
        return cls(
            intent_id=str(data["intent_id"]),
            agent_id=str(data["agent_id"]),
            workflow_id=str(data["workflow_id"]),
            action_class=str(data["action_class"]),
            description=str(data["description"]),
            parameters=dict(data.get("parameters", {})),
            irreversible=bool(data.get("irreversible", False)),
            alternatives=tuple(dict(a) for a in data.get("alternatives", [])),
            approval_tokens=dict(data.get("approval_tokens", {})),
        )


@dataclass(frozen=True)
class DeliberationVerdict:
    """Stage-3 output of one deliberation round."""

    outcome: Outcome
    reasoning: str
    rules_cited: tuple[str, ...] = ()
    proposed_parameters: Mapping[str, Scalar] | None = None
    confidence: Confidence = Confidence.UNAMBIGUOUS

    def __post_init__(self) -> None:
        if self.outcome is Outcome.SELF_CORRECT and self.proposed_parameters is None:
            raise ValueError("SELF_CORRECT verdict requires proposed_parameters")
        if self.outcome is not Outcome.SELF_CORRECT and self.proposed_parameters is not None:
            raise ValueError("proposed_parameters only valid for SELF_CORRECT")
        if self.confidence is Confidence.UNCERTAIN and self.outcome is not Outcome.ESCALATE:
            raise ValueError("an uncertain verdict must escalate, not proceed")
        if self.proposed_parameters is not None:
            object.__setattr__(self, "proposed_parameters", MappingProxyType(dict(self.proposed_parameters)))

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "outcome": self.outcome.value,
            "reasoning": self.reasoning,
            "rules_cited": list(self.rules_cited),
            "confidence": self.confidence.value,
        }
        if self.proposed_parameters is not None:
            out["proposed_parameters"] = dict(self.proposed_parameters)
        return out


@dataclass(frozen=True)
class EscalationMessage:
    """What a human reviewer sees: the action, the rules, the reasoning."""

    intent_summary: str
    triggering_rule_ids: tuple[str, ...]
    reasoning: str
    trigger_kind: TriggerKind

    def __post_init__(self) -> None:
        if not self.intent_summary.strip():
            raise ValueError("intent_summary must be non-empty")
        if not self.triggering_rule_ids:
            raise ValueError("triggering_rule_ids must be non-empty")
        if not self.reasoning.strip():
            raise ValueError("reasoning must be non-empty")

    def to_dict(self) -> dict:
        return {
            "intent_summary": self.intent_summary,
            "triggering_rule_ids": list(self.triggering_rule_ids),
            "reasoning": self.reasoning,
            "trigger_kind": self.trigger_kind.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EscalationMessage":
        return cls(
            intent_summary=str(data["intent_summary"]),
            triggering_rule_ids=tuple(str(r) for r in data["triggering_rule_ids"]),
            reasoning=str(data["reasoning"]),
            trigger_kind=TriggerKind(str(data["trigger_kind"])),
        )


@dataclass(frozen=True)
class ComplianceDecision:
    """Final routing for one intent: proceed, self-correct, or escalate.

    rules_cited aggregates citations across every round of the run (a
    corrected run that ends PROCEED still cites the rule that forced the
    correction); per-round citations are in the trace records.
    """

    outcome: Outcome
    reasoning: str
    rules_cited: tuple[str, ...] = ()
    revised_intent: IntentDescriptor | None = None
    escalation: EscalationMessage | None = None
    deliberation_rounds: int = 1

    def __post_init__(self) -> None:
        if self.deliberation_rounds < 1:
            raise ValueError("deliberation_rounds must be >= 1")
        if (self.revised_intent is not None) and (self.outcome is not Outcome.SELF_CORRECT):
            raise ValueError("revised_intent only valid for SELF_CORRECT")
        if (self.escalation is not None) != (self.outcome is Outcome.ESCALATE):
            raise ValueError("escalation present iff outcome is ESCALATE")
        if self.outcome is Outcome.SELF_CORRECT and self.revised_intent is None:
            raise ValueError("SELF_CORRECT decision requires revised_intent")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "outcome": self.outcome.value,
            "reasoning": self.reasoning,
            "rules_cited": list(self.rules_cited),
            "deliberation_rounds": self.deliberation_rounds,
        }
        if self.revised_intent is not None:
            out["revised_intent"] = self.revised_intent.to_dict()
        if self.escalation is not None:
            out["escalation"] = self.escalation.to_dict()
        return out
