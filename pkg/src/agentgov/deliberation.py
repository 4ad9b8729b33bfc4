"""Deliberation backends: permissibility reasoning over retrieved rules.

Two interchangeable implementations of the same contract:

* ReferenceDeliberator — deterministic, driven entirely by machine
  constraints. Rules without constraints are listed as not machine-
  checkable and never block. This is the testable ceiling the stochastic
  backend is measured against.
* LLMDeliberator — adapter for a chat-completion endpoint; builds the
  governance prompt, parses the structured reply, retries with a repair
  instruction on unparseable output, and surfaces a failure the engine
  converts to a fail-closed escalation.
"""

from __future__ import annotations

import json
import os
import threading
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable, Protocol

import httpx

from .context import RuntimeContext, Scalar
from .errors import DeliberatorFailure, ReplyParseError
from .intents import DeliberationVerdict, IntentDescriptor, Outcome
from .prompts import PromptConstructor
from .rules import MachineConstraint, Modality, Rule, comparison_holds

INTENT_KEY_PREFIX = "intent:"
IRREVERSIBLE_KEY = "intent:irreversible"

DEFAULT_READ_VERBS = frozenset({"read", "get", "list", "query", "view", "fetch", "retrieve"})


class Deliberator(Protocol):
    """Behavioral contract for stage-3 reasoning backends."""

    name: str
    prompt_version: str

    def deliberate(
        self, intent: IntentDescriptor, rules: list[Rule], ctx: RuntimeContext
    ) -> DeliberationVerdict: ...


def condition_values(
    intent: IntentDescriptor, parameters: Mapping[str, Scalar] | None = None
) -> dict[str, Scalar]:
    """Value map a constraint condition evaluates against: the intent's
    parameters (or a full substitute map) plus reserved ``intent:``-prefixed
    attributes."""
    values: dict[str, Scalar] = dict(intent.parameters if parameters is None else parameters)
    values[IRREVERSIBLE_KEY] = intent.irreversible
    values["intent:action_class"] = intent.action_class
    values["intent:agent_id"] = intent.agent_id
    values["intent:workflow_id"] = intent.workflow_id
    return values


def constraint_matches(
    constraint: MachineConstraint,
    intent: IntentDescriptor,
    ctx: RuntimeContext,
    parameters: Mapping[str, Scalar] | None = None,
) -> bool:
    """Does the constraint apply to this intent (class governed and
    condition satisfied)? ``parameters`` substitutes a full candidate map."""
    if not constraint.governs(intent.action_class):
        return False
    values = condition_values(intent, parameters)
    return all(comparison_holds(c, values, ctx.registries) for c in constraint.condition)


def is_write_action(action_class: str, read_verbs: frozenset[str] = DEFAULT_READ_VERBS) -> bool:
    """Dotted taxonomy: the final segment names the verb; anything not in
    the read-verb set counts as a write."""
    verb = action_class.rsplit(".", 1)[-1].lower()
    return verb not in read_verbs


class ReferenceDeliberator:
    """Deterministic stage-3 backend over machine constraints.

    Disposition per rule, in precedence order:
      FORBID match            -> blocking; first fully-compliant alternative
                                 (if any) becomes a self-correction proposal
      REQUIRE_APPROVAL match  -> blocking unless the intent carries a valid
                                 approval token naming the rule
      READ_ONLY match         -> as REQUIRE_APPROVAL, but only for
                                 write-class actions
      ALLOW match / no match  -> satisfied
      no constraint           -> noted as not machine-checkable

    ``token_validator`` checks (rule_id, token); when None, tokens carried
    on the intent are trusted as pre-validated (the engine strips invalid
    ones before deliberation).
    """

    name = "reference"
    prompt_version = "ref-1"

    def __init__(
        self,
        token_validator: Callable[[str, str], bool] | None = None,
        read_verbs: frozenset[str] = DEFAULT_READ_VERBS,
    ) -> None:
        self._token_validator = token_validator
        self._read_verbs = read_verbs

    def deliberate(
        self, intent: IntentDescriptor, rules: list[Rule], ctx: RuntimeContext
    ) -> DeliberationVerdict:
        lines: list[str] = [
            f"checked {len(rules)} applicable rule(s) against action {intent.action_class}:"
        ]
        forbids: list[Rule] = []
        approvals: list[Rule] = []

        for rule in rules:
            status, text = self._disposition(rule, intent, ctx)
            lines.append(f"- {rule.id}: {text}")
            if status == "forbid":
                forbids.append(rule)
            elif status == "approval":
                approvals.append(rule)

        if forbids:
            alternative = self._first_compliant_alternative(intent, rules, ctx)
            cited = tuple(r.id for r in forbids)
            if alternative is not None:
                lines.append(
                    f"verdict: self-correct; alternative parameter map {_stable(alternative)} satisfies every constraint."
                )
                return DeliberationVerdict(
                    outcome=Outcome.SELF_CORRECT,
                    reasoning="\n".join(lines),
                    rules_cited=cited,
                    proposed_parameters=alternative,
                )
            cited = tuple(r.id for r in forbids + approvals)
            lines.append("verdict: escalate; no alternative parameter map satisfies every constraint.")
            return DeliberationVerdict(
                outcome=Outcome.ESCALATE, reasoning="\n".join(lines), rules_cited=cited
            )

        if approvals:
            cited = tuple(r.id for r in approvals)
            lines.append("verdict: escalate; human approval required and no valid token held.")
            return DeliberationVerdict(
                outcome=Outcome.ESCALATE, reasoning="\n".join(lines), rules_cited=cited
            )

        lines.append("verdict: proceed; every machine-checkable rule is satisfied.")
        return DeliberationVerdict(outcome=Outcome.PROCEED, reasoning="\n".join(lines))

    # -- internals --

    def _has_token(self, intent: IntentDescriptor, rule_id: str) -> bool:
        token = intent.approval_tokens.get(rule_id)
        if token is None:
            return False
        if self._token_validator is None:
            return True
        return self._token_validator(rule_id, token)

    def _disposition(
        self,
        rule: Rule,
        intent: IntentDescriptor,
        ctx: RuntimeContext,
        parameters: Mapping[str, Scalar] | None = None,
    ) -> tuple[str, str]:
        """(status, reasoning line); status is one of ok/forbid/approval."""
        c = rule.constraint
        if c is None:
            return "ok", "not machine-checkable; deferred to natural-language review"
        if not constraint_matches(c, intent, ctx, parameters):
            return "ok", f"{c.modality.value} constraint does not match this intent; satisfied"
        if c.modality is Modality.ALLOW:
            return "ok", "explicitly allows this action"
        if c.modality is Modality.FORBID:
            return "forbid", "forbids this action as parameterized"
        if c.modality is Modality.READ_ONLY:
            if not is_write_action(intent.action_class, self._read_verbs):
                return "ok", "read-only constraint satisfied by a read-class action"
            if self._has_token(intent, rule.id):
                return "ok", "write under a read-only constraint, satisfied by a valid approval token"
            return "approval", "requires human approval: write-class action under a read-only constraint"
        # REQUIRE_APPROVAL
        if self._has_token(intent, rule.id):
            return "ok", "requires human approval, satisfied by a valid approval token"
        return "approval", "requires human approval and no valid token is held"

    def _blocking(self, rule: Rule, intent: IntentDescriptor, ctx: RuntimeContext, parameters) -> bool:
        status, _ = self._disposition(rule, intent, ctx, parameters)
        return status in ("forbid", "approval")

    def _first_compliant_alternative(
        self, intent: IntentDescriptor, rules: list[Rule], ctx: RuntimeContext
    ) -> Mapping[str, Scalar] | None:
        for alt in intent.alternatives:
            if not any(self._blocking(rule, intent, ctx, alt) for rule in rules):
                return alt
        return None


def _stable(params: Mapping[str, Scalar]) -> str:
    return json.dumps(dict(params), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class CompletionEndpointConfig:
    """Where and how to reach the chat-completion backend.

    The auth token is read from the named environment variable, never from
    configuration files.
    """

    base_url: str
    model: str
    auth_token_env: str = "GOV_LLM_API_KEY"
    temperature: float = 0.0
    timeout_s: float = 30.0
    max_retries: int = 2
    max_in_flight: int = 4

    def to_dict(self) -> dict:
        return {
            "base_url": self.base_url,
            "model": self.model,
            "auth_token_env": self.auth_token_env,
            "temperature": self.temperature,
            "timeout_s": self.timeout_s,
            "max_retries": self.max_retries,
            "max_in_flight": self.max_in_flight,
        }


class LLMDeliberator:
    """Chat-completion adapter for stage-3 reasoning.

    Wire format is the de-facto completion convention: POST
    ``{base_url}/chat/completions`` with ``{"model", "messages", "temperature"}``
    where messages carry role/content pairs; the reply text is read from
    ``choices[0].message.content``.
    """

    name = "llm"

    def __init__(
        self,
        endpoint: CompletionEndpointConfig,
        constructor: PromptConstructor | None = None,
        client: httpx.Client | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.constructor = constructor or PromptConstructor()
        self._client = client or httpx.Client(timeout=endpoint.timeout_s)
        self._sem = threading.Semaphore(endpoint.max_in_flight)

    @property
    def prompt_version(self) -> str:
        return self.constructor.template_version

    def deliberate(
        self, intent: IntentDescriptor, rules: list[Rule], ctx: RuntimeContext
    ) -> DeliberationVerdict:
        system_text, user_text = self.constructor.build_governance_prompt(intent, rules, ctx)
        messages = [
            {"role": "system", "content": system_text},
            {"role": "user", "content": user_text},
        ]
        last_reply = ""
        with self._sem:
            for _attempt in range(self.endpoint.max_retries + 1):
                content = self._complete(messages)
                last_reply = content
                try:
                    return self.constructor.parse_decision(content)
                except ReplyParseError:
                    messages = messages + [
                        {"role": "assistant", "content": content},
                        {"role": "user", "content": self.constructor.repair_instruction()},
                    ]
        raise DeliberatorFailure(
            "PARSE_FAILURE",
            f"no parseable decision after {self.endpoint.max_retries + 1} attempts",
            reply=last_reply,
        )

    def health_check(self) -> bool:
        """Reachability probe; any HTTP response counts as reachable."""
        try:
            self._client.get(self.endpoint.base_url, timeout=min(self.endpoint.timeout_s, 2.0))
            return True
        except httpx.HTTPError:
            return False

    def _complete(self, messages: list[dict]) -> str:
        headers = {}
        token = os.environ.get(self.endpoint.auth_token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = self._client.post(
                f"{self.endpoint.base_url.rstrip('/')}/chat/completions",
                json={
                    "model": self.endpoint.model,
                    "messages": messages,
                    "temperature": self.endpoint.temperature,
                },
                headers=headers,
                timeout=self.endpoint.timeout_s,
            )
            response.raise_for_status()
            payload = response.json()
            return str(payload["choices"][0]["message"]["content"])
        except httpx.TimeoutException as exc:
            raise DeliberatorFailure("TIMEOUT", str(exc)) from exc
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise DeliberatorFailure("TRANSPORT_ERROR", str(exc)) from exc
