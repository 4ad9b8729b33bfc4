"""Four-layer governance rule hierarchy.

Loading, validation, retrieval, lint, and conflict detection for rule-set
documents. Rules live in one of four layers with fixed precedence
(GLOBAL < WORKFLOW < AGENT < SITUATIONAL, lower rank wins conflicts) and
cascade downward: an action must satisfy every applicable layer at once.

Each rule is natural language first; an optional machine constraint gives
the deterministic backend and the conflict detector something checkable.
"""

from __future__ import annotations

import json
import threading
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .context import RuntimeContext, Scalar, is_scalar
from .errors import (
    PredicateTypeError,
    RulesetParseError,
    RulesetSchemaError,
    VersionConflictError,
)

REGISTRY_PREFIX = "registry:"


class GovernanceLayer(Enum):
    """Rule tiers in precedence order; lower rank = higher precedence."""

    GLOBAL = 1
    WORKFLOW = 2
    AGENT = 3
    SITUATIONAL = 4

    @property
    def rank(self) -> int:
        return self.value


class ComparisonOp(Enum):
    EQ = "EQ"
    NE = "NE"
    GT = "GT"
    GTE = "GTE"
    LT = "LT"
    LTE = "LTE"
    IN = "IN"


ORDERED_OPS = frozenset({ComparisonOp.GT, ComparisonOp.GTE, ComparisonOp.LT, ComparisonOp.LTE})


class Modality(Enum):
    FORBID = "FORBID"
    REQUIRE_APPROVAL = "REQUIRE_APPROVAL"
    READ_ONLY = "READ_ONLY"
    ALLOW = "ALLOW"


@dataclass(frozen=True)
class Comparison:
    """One conjunct: ``key <op> value``.

    ``value`` is a scalar, a tuple of scalars (for IN), or a
    ``registry:<name>`` reference. Registry references are meaningful for
    IN (membership) and NE (non-membership); other ops treat the string
    literally.
    """

    key: str
    op: ComparisonOp
    value: Scalar | tuple[Scalar, ...]


@dataclass(frozen=True)
class ActivationPredicate:
    """Conjunction of comparisons gating a situational rule.

    True iff every conjunct holds against context signals; a missing
    signal key makes its conjunct false, never an error.
    """

    conjuncts: tuple[Comparison, ...]


@dataclass(frozen=True)
class MachineConstraint:
    """Checkable core of a rule.

    action_classes: dotted action classes governed; empty = every class.
    modality: what the rule does to matching intents.
    condition: optional comparisons evaluated against intent parameters
        (plus reserved ``intent:``-prefixed attributes) and context
        registries; absent = constraint applies to every matching intent.
    """

    action_classes: frozenset[str]
    modality: Modality
    condition: tuple[Comparison, ...] = ()

    def governs(self, action_class: str) -> bool:
        return not self.action_classes or action_class in self.action_classes


@dataclass(frozen=True)
class Scope:
    """Workflow/agent selectors; an empty set means "all"."""

    workflow_ids: frozenset[str] = frozenset()
    agent_ids: frozenset[str] = frozenset()

    def matches(self, workflow_id: str, agent_id: str) -> bool:
        if self.workflow_ids and workflow_id not in self.workflow_ids:
            return False
        if self.agent_ids and agent_id not in self.agent_ids:
            return False
        return True

    @property
    def empty(self) -> bool:
        return not self.workflow_ids and not self.agent_ids


@dataclass(frozen=True)
class Rule:
    id: str
    layer: GovernanceLayer
    scope: Scope
    text: str
    rationale: str = ""
    constraint: MachineConstraint | None = None
    predicate: ActivationPredicate | None = None
    enabled: bool = True


@dataclass(frozen=True)
class RuleSetDocument:
    """One immutable published version of the rule hierarchy."""

    version: int
    rules: tuple[Rule, ...]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def rule(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)


@dataclass(frozen=True)
class Violation:
    code: str
    rule_id: str | None
    message: str


@dataclass(frozen=True)
class LintWarning:
    code: str
    rule_id: str
    message: str


@dataclass(frozen=True)
class ConflictReport:
    """Contradictory pair of machine constraints; winner is the rule whose
    layer outranks (lower rank), per cascading precedence."""

    first_rule_id: str
    second_rule_id: str
    winner_id: str
    detail: str


# ---------------------------------------------------------------------------
# Comparison evaluation


def _kind(value: object) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    return "other"


def _scalar_eq(a: object, b: object) -> bool:
    # bool/number kept distinct: True must not equal 1.
    if _kind(a) != _kind(b):
        return False
    return a == b


def _registry_name(value: object) -> str | None:
    if isinstance(value, str) and value.startswith(REGISTRY_PREFIX):
        return value[len(REGISTRY_PREFIX):]
    return None


def comparison_holds(
    cmp: Comparison,
    values: Mapping[str, Scalar],
    registries: Mapping[str, frozenset[str]] | None = None,
) -> bool:
    """Evaluate one conjunct against a value map.

    Missing key => False. Ordered ops on differing value kinds raise
    PredicateTypeError (a rule-authoring bug, not a runtime state).
    """
    if cmp.key not in values:
        return False
    actual = values[cmp.key]
    expected = cmp.value

    if cmp.op is ComparisonOp.IN:
        name = _registry_name(expected)
        if name is not None:
            members = (registries or {}).get(name, frozenset())
            return actual in members
        if isinstance(expected, (tuple, list)):
            return any(_scalar_eq(actual, item) for item in expected)
        return False

    if cmp.op is ComparisonOp.EQ:
        return _scalar_eq(actual, expected)

    if cmp.op is ComparisonOp.NE:
        name = _registry_name(expected)
        if name is not None:
            members = (registries or {}).get(name, frozenset())
            return actual not in members
        return not _scalar_eq(actual, expected)

    # ordered
    if _kind(actual) != _kind(expected):
        raise PredicateTypeError(
            f"ordered comparison {cmp.key} {cmp.op.value} mixes kinds "
            f"{_kind(actual)} and {_kind(expected)}"
        )
    if cmp.op is ComparisonOp.GT:
        return actual > expected
    if cmp.op is ComparisonOp.GTE:
        return actual >= expected
    if cmp.op is ComparisonOp.LT:
        return actual < expected
    return actual <= expected


def evaluate_predicate(predicate: ActivationPredicate, ctx: RuntimeContext) -> bool:
    """Conjunction over context signals; missing key makes a conjunct false."""
    return all(comparison_holds(c, ctx.signals, ctx.registries) for c in predicate.conjuncts)


# ---------------------------------------------------------------------------
# Retrieval


def applicable_rules(
    doc: RuleSetDocument,
    agent_id: str,
    workflow_id: str,
    ctx: RuntimeContext,
) -> list[Rule]:
    """All enabled rules whose scope matches and (for situational rules)
    whose predicate holds on the snapshot, sorted by layer rank then id."""
    out = []
    for rule in doc.rules:
        if not rule.enabled:
            continue
        if not rule.scope.matches(workflow_id, agent_id):
            continue
        if rule.predicate is not None and not evaluate_predicate(rule.predicate, ctx):
            continue
        out.append(rule)
    out.sort(key=lambda r: (r.layer.rank, r.id))
    return out


# ---------------------------------------------------------------------------
# Validation


def validate_ruleset(doc: RuleSetDocument) -> list[Violation]:
    """Structural invariants; an empty result is required before activation."""
    violations: list[Violation] = []
    if not isinstance(doc.version, int) or isinstance(doc.version, bool) or doc.version < 1:
        violations.append(Violation("BAD_VERSION", None, f"version must be a positive integer, got {doc.version!r}"))

    seen: set[str] = set()
    for rule in doc.rules:
        if not rule.id:
            violations.append(Violation("EMPTY_ID", None, "rule with empty id"))
            continue
        if rule.id in seen:
            violations.append(Violation("DUPLICATE_ID", rule.id, f"rule id {rule.id} appears more than once"))
        seen.add(rule.id)

        if not rule.text.strip():
            violations.append(Violation("EMPTY_TEXT", rule.id, "rule text must be non-empty"))

        if rule.layer is GovernanceLayer.SITUATIONAL:
            if rule.predicate is None:
                violations.append(Violation("MISSING_PREDICATE", rule.id, "situational rule requires an activation predicate"))
        elif rule.predicate is not None:
            violations.append(Violation("UNEXPECTED_PREDICATE", rule.id, f"{rule.layer.name} rule must not carry a predicate"))

        if rule.predicate is not None and not rule.predicate.conjuncts:
            violations.append(Violation("EMPTY_PREDICATE", rule.id, "activation predicate needs at least one conjunct"))

        if rule.layer is GovernanceLayer.GLOBAL and not rule.scope.empty:
            violations.append(Violation("NONEMPTY_GLOBAL_SCOPE", rule.id, "global rules apply everywhere; scope selectors must be empty"))
        if rule.layer is GovernanceLayer.WORKFLOW and not rule.scope.workflow_ids:
            violations.append(Violation("EMPTY_WORKFLOW_SCOPE", rule.id, "workflow rule requires at least one workflow id"))
        if rule.layer is GovernanceLayer.AGENT and not rule.scope.agent_ids:
            violations.append(Violation("EMPTY_AGENT_SCOPE", rule.id, "agent rule requires at least one agent id"))
    return violations


# ---------------------------------------------------------------------------
# Lint

_DEFAULT_PROHIBITION_MARKERS = (
    "do not",
    "don't",
    "never",
    "must not",
    "may not",
    "shall not",
    "prohibited",
    "forbidden",
    "not allowed",
    "not permitted",
)

_DEFAULT_ALTERNATIVE_MARKERS = (
    "instead",
    "unless",
    "without",
    "only ",
    "use ",
    "prefer",
    "alternative",
    "should ",
    "may ",
    "restricted to",
)


@dataclass(frozen=True)
class LintConfig:
    """Heuristic keyword lists; tunable configuration, not code.

    prohibition_markers: phrases that mark a rule as a prohibition.
    alternative_markers: phrases that signal a stated compliant path.
    """

    prohibition_markers: tuple[str, ...] = _DEFAULT_PROHIBITION_MARKERS
    alternative_markers: tuple[str, ...] = _DEFAULT_ALTERNATIVE_MARKERS


def lint_rule(rule: Rule, config: LintConfig | None = None) -> list[LintWarning]:
    """Advisory style checks: rules should explain themselves, frame the
    compliant path, and stay as narrow as their layer allows."""
    cfg = config or LintConfig()
    warnings: list[LintWarning] = []
    text = rule.text.lower()

    if not rule.rationale.strip():
        warnings.append(LintWarning("MISSING_RATIONALE", rule.id, "rule states what but not why"))

    prohibitive = any(marker in text for marker in cfg.prohibition_markers)
    has_alternative = any(marker in text for marker in cfg.alternative_markers)
    if prohibitive and not has_alternative and not rule.rationale.strip():
        warnings.append(
            LintWarning(
                "NEGATIVE_ONLY_FRAMING",
                rule.id,
                "prohibition with no stated compliant alternative and no rationale",
            )
        )

    if (
        rule.layer is GovernanceLayer.GLOBAL
        and rule.constraint is not None
        and not rule.constraint.action_classes
        and rule.constraint.modality is not Modality.REQUIRE_APPROVAL
    ):
        warnings.append(
            LintWarning(
                "OVERBROAD_SCOPE",
                rule.id,
                f"global {rule.constraint.modality.value} constraint over every action class",
            )
        )
    return warnings


def lint_ruleset(doc: RuleSetDocument, config: LintConfig | None = None) -> list[LintWarning]:
    out: list[LintWarning] = []
    for rule in doc.rules:
        out.extend(lint_rule(rule, config))
    return out


# ---------------------------------------------------------------------------
# Conflict detection

_CONTRADICTORY = frozenset(
    {
        frozenset({Modality.ALLOW, Modality.FORBID}),
        frozenset({Modality.ALLOW, Modality.REQUIRE_APPROVAL}),
    }
)


def _sets_overlap(a: frozenset[str], b: frozenset[str]) -> bool:
    # empty selector = universal
    return not a or not b or bool(a & b)


def _scopes_overlap(a: Scope, b: Scope) -> bool:
    return _sets_overlap(a.workflow_ids, b.workflow_ids) and _sets_overlap(a.agent_ids, b.agent_ids)


def detect_conflicts(doc: RuleSetDocument) -> list[ConflictReport]:
    """Pairs of machine constraints with overlapping scope, overlapping
    action classes, and contradictory modalities (ALLOW vs FORBID, ALLOW vs
    REQUIRE_APPROVAL). Includes disabled rules: this is an authoring-time
    check and staged rules deserve it too. Rules without constraints are
    never reported; natural-language tension is the deliberator's job.
    """
    constrained = sorted((r for r in doc.rules if r.constraint is not None), key=lambda r: r.id)
    reports: list[ConflictReport] = []
    for i, a in enumerate(constrained):
        for b in constrained[i + 1:]:
            if frozenset({a.constraint.modality, b.constraint.modality}) not in _CONTRADICTORY:
                continue
            if not _scopes_overlap(a.scope, b.scope):
                continue
            if not _sets_overlap(a.constraint.action_classes, b.constraint.action_classes):
                continue
            winner = min(a, b, key=lambda r: (r.layer.rank, r.id))
            reports.append(
                ConflictReport(
                    first_rule_id=a.id,
                    second_rule_id=b.id,
                    winner_id=winner.id,
                    detail=(
                        f"{a.id} ({a.layer.name} {a.constraint.modality.value}) vs "
                        f"{b.id} ({b.layer.name} {b.constraint.modality.value}); "
                        f"{winner.id} takes precedence"
                    ),
                )
            )
    return reports


# ---------------------------------------------------------------------------
# Document (de)serialization

_RULE_FIELDS = {"id", "layer", "scope", "text", "rationale", "constraint", "predicate", "enabled"}


def _decode_value(raw: Any, where: str, violations: list[Violation], rule_id: str | None):
    if isinstance(raw, list):
        items = []
        for item in raw:
            if not is_scalar(item):
                violations.append(Violation("BAD_VALUE", rule_id, f"{where}: list items must be scalars"))
                return ()
            items.append(item)
        return tuple(items)
    if is_scalar(raw):
        return raw
    violations.append(Violation("BAD_VALUE", rule_id, f"{where}: value must be a scalar or list of scalars"))
    return ""


def _decode_comparisons(raw: Any, where: str, violations: list[Violation], rule_id: str | None) -> tuple[Comparison, ...]:
    if not isinstance(raw, list):
        violations.append(Violation("BAD_COMPARISON", rule_id, f"{where} must be a list"))
        return ()
    out = []
    for item in raw:
        if not isinstance(item, dict) or not {"key", "op", "value"} <= set(item):
            violations.append(Violation("BAD_COMPARISON", rule_id, f"{where} items need key/op/value"))
            continue
        try:
            op = ComparisonOp(str(item["op"]).upper())
        except ValueError:
            violations.append(Violation("BAD_OP", rule_id, f"{where}: unknown op {item['op']!r}"))
            continue
        out.append(Comparison(key=str(item["key"]), op=op, value=_decode_value(item["value"], where, violations, rule_id)))
    return tuple(out)


def _decode_rule(raw: Any, violations: list[Violation]) -> Rule | None:
    if not isinstance(raw, dict):
        violations.append(Violation("BAD_RULE", None, "rule entries must be objects"))
        return None
    rule_id = str(raw.get("id", "")) or None
    unknown = set(raw) - _RULE_FIELDS
    if unknown:
        violations.append(Violation("UNKNOWN_FIELD", rule_id, f"unknown rule fields: {sorted(unknown)}"))

    try:
        layer = GovernanceLayer[str(raw.get("layer", "")).upper()]
    except KeyError:
        violations.append(Violation("BAD_LAYER", rule_id, f"unknown layer {raw.get('layer')!r}"))
        return None

    scope_raw = raw.get("scope", {}) or {}
    scope = Scope(
        workflow_ids=frozenset(str(w) for w in scope_raw.get("workflow_ids", [])),
        agent_ids=frozenset(str(a) for a in scope_raw.get("agent_ids", [])),
    )

    constraint = None
    if raw.get("constraint") is not None:
        craw = raw["constraint"]
        if not isinstance(craw, dict):
            violations.append(Violation("BAD_CONSTRAINT", rule_id, "constraint must be an object"))
        else:
            try:
                modality = Modality(str(craw.get("modality", "")).upper())
            except ValueError:
                violations.append(Violation("BAD_MODALITY", rule_id, f"unknown modality {craw.get('modality')!r}"))
                modality = None
            if modality is not None:
                constraint = MachineConstraint(
                    action_classes=frozenset(str(a) for a in craw.get("action_classes", [])),
                    modality=modality,
                    condition=_decode_comparisons(craw.get("condition", []), "constraint.condition", violations, rule_id),
                )

    predicate = None
    if raw.get("predicate") is not None:
        praw = raw["predicate"]
        if not isinstance(praw, dict) or "conjuncts" not in praw:
            violations.append(Violation("BAD_PREDICATE", rule_id, "predicate must be an object with conjuncts"))
        else:
            predicate = ActivationPredicate(
                conjuncts=_decode_comparisons(praw["conjuncts"], "predicate.conjuncts", violations, rule_id)
            )

    return Rule(
        id=str(raw.get("id", "")),
        layer=layer,
        scope=scope,
        text=str(raw.get("text", "")),
        rationale=str(raw.get("rationale", "")),
        constraint=constraint,
        predicate=predicate,
        enabled=bool(raw.get("enabled", True)),
    )


def document_from_dict(data: Any) -> RuleSetDocument:
    """Decode + validate; raises RulesetSchemaError on any violation."""
    if not isinstance(data, dict):
        raise RulesetParseError("rule-set document must be a JSON object")
    violations: list[Violation] = []
    rules_raw = data.get("rules", [])
    if not isinstance(rules_raw, list):
        raise RulesetParseError("'rules' must be a list")
    rules = []
    for raw in rules_raw:
        rule = _decode_rule(raw, violations)
        if rule is not None:
            rules.append(rule)
    version = data.get("version", 0)
    doc = RuleSetDocument(
        version=version if isinstance(version, int) and not isinstance(version, bool) else -1,
        rules=tuple(rules),
        metadata=dict(data.get("metadata", {}) or {}),
    )
    violations.extend(validate_ruleset(doc))
    if violations:
        raise RulesetSchemaError(violations)
    return doc


def load_ruleset(source: bytes | str) -> RuleSetDocument:
    """Parse and validate a rule-set document from JSON bytes."""
    try:
        data = json.loads(source)
    except json.JSONDecodeError as exc:
        raise RulesetParseError(f"not valid JSON: {exc}") from exc
    return document_from_dict(data)


def _comparison_to_dict(cmp: Comparison) -> dict:
    value = list(cmp.value) if isinstance(cmp.value, tuple) else cmp.value
    return {"key": cmp.key, "op": cmp.op.value, "value": value}


def rule_to_dict(rule: Rule) -> dict:
    out: dict[str, Any] = {
        "id": rule.id,
        "layer": rule.layer.name,
        "scope": {
            "workflow_ids": sorted(rule.scope.workflow_ids),
            "agent_ids": sorted(rule.scope.agent_ids),
        },
        "text": rule.text,
        "rationale": rule.rationale,
        "enabled": rule.enabled,
    }
    if rule.constraint is not None:
        out["constraint"] = {
            "action_classes": sorted(rule.constraint.action_classes),
            "modality": rule.constraint.modality.value,
            "condition": [_comparison_to_dict(c) for c in rule.constraint.condition],
        }
    if rule.predicate is not None:
        out["predicate"] = {"conjuncts": [_comparison_to_dict(c) for c in rule.predicate.conjuncts]}
    return out


def document_to_dict(doc: RuleSetDocument) -> dict:
    return {
        "version": doc.version,
        "metadata": dict(doc.metadata),
        "rules": [rule_to_dict(r) for r in doc.rules],
    }


# ---------------------------------------------------------------------------
# Versioned store


class RuleStore:
    """Versioned documents with an atomically swapped active version.

    Reads are plain reference grabs; activation serializes through a lock.
    Published versions are immutable and kept for pinned in-flight runs
    and for version diffing.
    """

    def __init__(self, initial: RuleSetDocument) -> None:
        self._lock = threading.Lock()
        self._versions: dict[int, RuleSetDocument] = {}
        self._active: RuleSetDocument | None = None
        self.activate(initial)

    def active(self) -> RuleSetDocument:
        doc = self._active
        assert doc is not None
        return doc

    def get(self, version: int) -> RuleSetDocument:
        try:
            return self._versions[version]
        except KeyError:
            raise VersionConflictError(f"no such rule-set version: {version}") from None

    def versions(self) -> list[int]:
        return sorted(self._versions)

    def activate(self, doc: RuleSetDocument) -> RuleSetDocument:
        violations = validate_ruleset(doc)
        if violations:
            raise RulesetSchemaError(violations)
        with self._lock:
            expected = 1 if self._active is None else self._active.version + 1
            if doc.version != expected:
                raise VersionConflictError(
                    f"expected version {expected}, got {doc.version}"
                )
            self._versions[doc.version] = doc
            self._active = doc
        return doc

    def propose(self, data: dict) -> RuleSetDocument:
        """Build the next version from a submitted document body.

        A missing or explicit next version is accepted; anything else is a
        conflict (stale console edit).
        """
        body = dict(data)
        with self._lock:
            next_version = (self._active.version + 1) if self._active else 1
        incoming = body.get("version")
        if incoming is None:
            body["version"] = next_version
        elif incoming != next_version:
            raise VersionConflictError(f"expected version {next_version}, got {incoming}")
        return document_from_dict(body)
