"""Governance prompt construction and structured-reply parsing.

The system prompt sent to a language-model backend is the fixed
enforcement block followed by the governance block: all four layer
sections in precedence order, each retrieved rule rendered with its
rationale. Rendering is deterministic — byte-identical for identical
inputs — and every section is present even when empty, so the prompt
shape never varies.

Replies must contain one structured JSON decision object; parsing scans
the reply for the first balanced object carrying a ``decision`` field and
never looks at rule text, so outcome tokens or brace payloads inside
rules cannot alter the parse.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .context import RuntimeContext
from .errors import ReplyParseError
from .intents import Confidence, DeliberationVerdict, IntentDescriptor, Outcome
from .rules import GovernanceLayer, Rule

DEFAULT_ENFORCEMENT = """You are operating under mandatory pre-action governance.

Before executing any action, you must:
1. State the action you intend to take.
2. Retrieve and review every governance rule in the governance block below, in layer order.
3. Reason explicitly: does the intended action comply with every applicable rule?
4. Output one of: PROCEED, SELF-CORRECT, or ESCALATE, with a structured reasoning trace recording the rules consulted, your reasoning, and your decision.

Escalate rather than proceed when an action is categorically prohibited, when it is irreversible and carries no valid approval token, or when your permissibility reasoning is genuinely uncertain. The rules are presented pre-sorted by precedence; do not re-rank them. A valid approval token listed for a rule satisfies that rule's human-approval requirement.
"""

DEFAULT_REPLY_FORMAT = """Reply with exactly one JSON object (no code fences) shaped like:
{"decision": "PROCEED" | "SELF-CORRECT" | "ESCALATE",
 "rules_consulted": ["<rule id>", ...],
 "reasoning": "<your permissibility reasoning>",
 "proposed_parameters": {...},
 "confidence": "UNAMBIGUOUS" | "UNCERTAIN"}

proposed_parameters is required for SELF-CORRECT and must be omitted otherwise.
If your confidence is UNCERTAIN the decision must be ESCALATE.
"""

_REPAIR_INSTRUCTION = (
    "Your previous reply did not contain a parseable decision object. "
    "Reply again with exactly one JSON object in the documented shape, and nothing else."
)

_OUTCOME_TOKENS = {
    "PROCEED": Outcome.PROCEED,
    "SELF_CORRECT": Outcome.SELF_CORRECT,
    "ESCALATE": Outcome.ESCALATE,
}

_LAYER_ORDER = (
    GovernanceLayer.GLOBAL,
    GovernanceLayer.WORKFLOW,
    GovernanceLayer.AGENT,
    GovernanceLayer.SITUATIONAL,
)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(", ", ": "), ensure_ascii=False)


class PromptConstructor:
    """Builds the injected governance prompt and parses model replies.

    Template texts are operator-editable assets; the version id recorded
    in every trace is derived from their content, so any wording change
    is visible in the audit trail without manual bookkeeping.
    """

    def __init__(self, enforcement_text: str = DEFAULT_ENFORCEMENT, reply_format_text: str = DEFAULT_REPLY_FORMAT) -> None:
        self.enforcement_text = enforcement_text
        self.reply_format_text = reply_format_text
        digest = hashlib.sha256((enforcement_text + "\n" + reply_format_text).encode("utf-8")).hexdigest()
        self.template_version = f"tmpl-{digest[:12]}"

    @classmethod
    def from_dir(cls, directory: str | Path) -> "PromptConstructor":
        directory = Path(directory)
        return cls(
            enforcement_text=(directory / "enforcement.txt").read_text(encoding="utf-8"),
            reply_format_text=(directory / "reply_format.txt").read_text(encoding="utf-8"),
        )

    # -- construction --

    def build_governance_prompt(
        self,
        intent: IntentDescriptor,
        rules: list[Rule],
        ctx: RuntimeContext,
    ) -> tuple[str, str]:
        """(system_text, user_text) for one deliberation round."""
        system_text = (
            self.enforcement_text.rstrip()
            + "\n\n"
            + self._governance_block(intent, rules, ctx)
            + "\n\n"
            + self.reply_format_text.rstrip()
            + "\n"
        )
        user_text = self._intent_block(intent)
        return system_text, user_text

    def _governance_block(self, intent: IntentDescriptor, rules: list[Rule], ctx: RuntimeContext) -> str:
        lines = [
            "=== GOVERNANCE BLOCK "
            f"(agent={intent.agent_id} workflow={intent.workflow_id} snapshot={ctx.snapshot_id}) ==="
        ]
        by_layer: dict[GovernanceLayer, list[Rule]] = {layer: [] for layer in _LAYER_ORDER}
        for rule in rules:
            by_layer[rule.layer].append(rule)
        for layer in _LAYER_ORDER:
            lines.append(f"[{layer.name}]")
            section = by_layer[layer]
            if not section:
                lines.append("(none)")
                continue
            for rule in section:
                rationale = rule.rationale.strip() or "none given"
                lines.append(f"- [{rule.id}] {rule.text} (Rationale: {rationale})")
        return "\n".join(lines)

    def _intent_block(self, intent: IntentDescriptor) -> str:
        lines = [
            "Intended action:",
            f"  description: {intent.description}",
            f"  action_class: {intent.action_class}",
            f"  parameters: {_canonical(dict(intent.parameters))}",
            f"  irreversible: {str(intent.irreversible).lower()}",
        ]
        if intent.approval_tokens:
            lines.append(f"  approval tokens held for rules: {_canonical(sorted(intent.approval_tokens))}")
        if intent.alternatives:
            lines.append("  ranked alternative parameter maps:")
            for i, alt in enumerate(intent.alternatives, start=1):
                lines.append(f"    {i}. {_canonical(dict(alt))}")
        else:
            lines.append("  ranked alternative parameter maps: (none)")
        return "\n".join(lines) + "\n"

    # -- parsing --

    def parse_decision(self, model_reply: str) -> DeliberationVerdict:
        """Extract the first balanced decision object from a reply.

        Tolerates prose around the object and case/hyphen variation in the
        decision token; everything else is a parse failure carrying the
        offending reply for the audit trail.
        """
        obj = _extract_decision_object(model_reply)
        if obj is None:
            raise ReplyParseError("no decision object found in reply", reply=model_reply)

        token = str(obj.get("decision", "")).strip().upper().replace("-", "_").replace(" ", "_")
        outcome = _OUTCOME_TOKENS.get(token)
        if outcome is None:
            raise ReplyParseError(f"unknown decision token: {obj.get('decision')!r}", reply=model_reply)

        rules_consulted = obj.get("rules_consulted")
        if not isinstance(rules_consulted, list):
            raise ReplyParseError("rules_consulted missing or not a list", reply=model_reply)
        reasoning = obj.get("reasoning")
        if not isinstance(reasoning, str) or not reasoning.strip():
            raise ReplyParseError("reasoning missing or empty", reply=model_reply)

        proposed = obj.get("proposed_parameters")
        if outcome is Outcome.SELF_CORRECT and not isinstance(proposed, dict):
            raise ReplyParseError("SELF-CORRECT reply lacks proposed_parameters", reply=model_reply)
        if outcome is not Outcome.SELF_CORRECT:
            proposed = None

        confidence_token = str(obj.get("confidence", "UNAMBIGUOUS")).strip().upper()
        try:
            confidence = Confidence(confidence_token)
        except ValueError:
            raise ReplyParseError(f"unknown confidence token: {obj.get('confidence')!r}", reply=model_reply) from None
        if confidence is Confidence.UNCERTAIN and outcome is not Outcome.ESCALATE:
            raise ReplyParseError("uncertain reply must escalate", reply=model_reply)

        return DeliberationVerdict(
            outcome=outcome,
            reasoning=reasoning,
            rules_cited=tuple(str(r) for r in rules_consulted),
            proposed_parameters=proposed,
            confidence=confidence,
        )

    def repair_instruction(self) -> str:
        return _REPAIR_INSTRUCTION + "\n" + self.reply_format_text


def _extract_decision_object(text: str) -> dict | None:
    """First balanced JSON object in the text that carries a decision field."""
    decoder = json.JSONDecoder()
    idx = text.find("{")
    while idx != -1:
        try:
            obj, _end = decoder.raw_decode(text, idx)
        except ValueError:
            idx = text.find("{", idx + 1)
            continue
        if isinstance(obj, dict) and "decision" in obj:
            return obj
        idx = text.find("{", idx + 1)
    return None


def render_reply(verdict: DeliberationVerdict) -> str:
    """Render a verdict in the documented reply shape (round-trip partner
    of parse_decision)."""
    token = "SELF-CORRECT" if verdict.outcome is Outcome.SELF_CORRECT else verdict.outcome.value
    obj = {
        "decision": token,
        "rules_consulted": list(verdict.rules_cited),
        "reasoning": verdict.reasoning,
        "confidence": verdict.confidence.value,
    }
    if verdict.proposed_parameters is not None:
        obj["proposed_parameters"] = dict(verdict.proposed_parameters)
    return json.dumps(obj, ensure_ascii=False)
