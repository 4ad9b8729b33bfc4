"""Pre-action governance middleware for autonomous agent workflows.

Before every consequential agent action: retrieve the applicable rules
from a four-layer cascading hierarchy, deliberate about permissibility,
and route the intent — proceed, self-correct, or escalate to a human —
with every round chained into an auditable trace log.
"""

from .audit import TraceLog, TraceRecord, VerificationReport
from .context import LiveContext, RuntimeContext
from .deliberation import (
    CompletionEndpointConfig,
    Deliberator,
    LLMDeliberator,
    ReferenceDeliberator,
)
from .engine import EngineConfig, GovernanceEngine, build_escalation
from .escalations import ApprovalToken, EscalationQueue, EscalationStatus, PendingEscalation
from .intents import (
    ComplianceDecision,
    Confidence,
    DeliberationVerdict,
    EscalationMessage,
    IntentDescriptor,
    Outcome,
    TriggerKind,
)
from .prompts import PromptConstructor, render_reply
from .rules import (
    ActivationPredicate,
    Comparison,
    ComparisonOp,
    ConflictReport,
    GovernanceLayer,
    LintWarning,
    MachineConstraint,
    Modality,
    Rule,
    RuleSetDocument,
    RuleStore,
    Scope,
    Violation,
    applicable_rules,
    detect_conflicts,
    evaluate_predicate,
    lint_rule,
    load_ruleset,
    validate_ruleset,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationPredicate",
    "ApprovalToken",
    "ComplianceDecision",
    "CompletionEndpointConfig",
    "Comparison",
    "ComparisonOp",
    "Confidence",
    "ConflictReport",
    "Deliberator",
    "DeliberationVerdict",
    "EngineConfig",
    "EscalationMessage",
    "EscalationQueue",
    "EscalationStatus",
    "GovernanceEngine",
    "GovernanceLayer",
    "IntentDescriptor",
    "LintWarning",
    "LiveContext",
    "LLMDeliberator",
    "MachineConstraint",
    "Modality",
    "Outcome",
    "PendingEscalation",
    "PromptConstructor",
    "ReferenceDeliberator",
    "Rule",
    "RuleSetDocument",
    "RuleStore",
    "RuntimeContext",
    "Scope",
    "TraceLog",
    "TraceRecord",
    "TriggerKind",
    "VerificationReport",
    "Violation",
    "applicable_rules",
    "build_escalation",
    "detect_conflicts",
    "evaluate_predicate",
    "lint_rule",
    "load_ruleset",
    "render_reply",
    "validate_ruleset",
]
